//! Closed bounding regions used for separation certificates and box tests.

/// A closed region in `R^d`. Polygons are convex, counter-clockwise or
/// clockwise; unions are finite.
#[derive(Clone, Debug, PartialEq)]
pub enum Region {
    Interval { lo: f64, hi: f64 },
    Polygon(Vec<[f64; 2]>),
    Ball { center: Vec<f64>, radius: f64 },
    Union(Vec<Region>),
}

impl Region {
    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        Region::Ball { center, radius }
    }

    pub fn dim(&self) -> usize {
        match self {
            Region::Interval { .. } => 1,
            Region::Polygon(_) => 2,
            Region::Ball { center, .. } => center.len(),
            Region::Union(parts) => parts.first().map_or(0, |p| p.dim()),
        }
    }

    /// Axis-aligned bounding box `(lo, hi)`.
    pub fn bbox(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Region::Interval { lo, hi } => (vec![*lo], vec![*hi]),
            Region::Polygon(pts) => {
                let mut lo = vec![f64::INFINITY; 2];
                let mut hi = vec![f64::NEG_INFINITY; 2];
                for p in pts {
                    for k in 0..2 {
                        lo[k] = lo[k].min(p[k]);
                        hi[k] = hi[k].max(p[k]);
                    }
                }
                (lo, hi)
            }
            Region::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            Region::Union(parts) => {
                let d = self.dim();
                let mut lo = vec![f64::INFINITY; d];
                let mut hi = vec![f64::NEG_INFINITY; d];
                for p in parts {
                    let (l, h) = p.bbox();
                    for k in 0..d {
                        lo[k] = lo[k].min(l[k]);
                        hi[k] = hi[k].max(h[k]);
                    }
                }
                (lo, hi)
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Region::Interval { lo, hi } => hi - lo,
            Region::Polygon(pts) => {
                let mut d: f64 = 0.0;
                for a in pts {
                    for b in pts {
                        d = d.max(dist2(*a, *b));
                    }
                }
                d
            }
            Region::Ball { radius, .. } => 2.0 * radius,
            Region::Union(_) => {
                let (lo, hi) = self.bbox();
                lo.iter().zip(&hi).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt()
            }
        }
    }

    /// Lower bound on the gap between the regions: positive iff they are
    /// certified disjoint, `≤ 0` when they touch or overlap.
    pub fn separation(&self, other: &Region) -> f64 {
        match (self, other) {
            (Region::Union(parts), _) => parts
                .iter()
                .map(|p| p.separation(other))
                .fold(f64::INFINITY, f64::min),
            (_, Region::Union(parts)) => parts
                .iter()
                .map(|p| self.separation(p))
                .fold(f64::INFINITY, f64::min),
            (Region::Interval { lo: a, hi: b }, Region::Interval { lo: c, hi: d }) => {
                (c - b).max(a - d)
            }
            (Region::Polygon(p), Region::Polygon(q)) => polygon_gap(p, q),
            (Region::Polygon(p), Region::Ball { center, radius })
            | (Region::Ball { center, radius }, Region::Polygon(p)) => {
                point_polygon_distance([center[0], center[1]], p) - radius
            }
            (Region::Ball { center: c1, radius: r1 }, Region::Ball { center: c2, radius: r2 }) => {
                euclid(c1, c2) - r1 - r2
            }
            (Region::Interval { lo, hi }, Region::Ball { center, radius })
            | (Region::Ball { center, radius }, Region::Interval { lo, hi }) => {
                (center[0] - radius - hi).max(lo - center[0] - radius)
            }
            _ => f64::NEG_INFINITY,
        }
    }

    /// Whether the closed region lies inside the half-open box `[lo, hi)`.
    pub fn inside_box(&self, lo: &[f64], hi: &[f64]) -> bool {
        match self {
            Region::Union(parts) => parts.iter().all(|p| p.inside_box(lo, hi)),
            _ => {
                let (l, h) = self.bbox();
                l.iter().zip(lo).all(|(a, b)| a >= b) && h.iter().zip(hi).all(|(a, b)| a < b)
            }
        }
    }

    /// Conservative intersection test with the box `[lo, hi]`: false means
    /// certainly disjoint.
    pub fn meets_box(&self, lo: &[f64], hi: &[f64]) -> bool {
        match self {
            Region::Union(parts) => parts.iter().any(|p| p.meets_box(lo, hi)),
            Region::Polygon(p) => {
                let bx = vec![[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]];
                polygon_gap(p, &bx) <= 0.0
            }
            Region::Ball { center, radius } => {
                let d2: f64 = center
                    .iter()
                    .zip(lo.iter().zip(hi))
                    .map(|(&c, (&l, &h))| {
                        let e = if c < l { l - c } else if c > h { c - h } else { 0.0 };
                        e * e
                    })
                    .sum();
                d2 <= radius * radius
            }
            Region::Interval { lo: a, hi: b } => *b >= lo[0] && *a <= hi[0],
        }
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn project(poly: &[[f64; 2]], axis: [f64; 2]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in poly {
        let v = p[0] * axis[0] + p[1] * axis[1];
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

fn edge_normals(poly: &[[f64; 2]]) -> impl Iterator<Item = [f64; 2]> + '_ {
    (0..poly.len()).filter_map(move |i| {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let n = [b[1] - a[1], a[0] - b[0]];
        let len = (n[0] * n[0] + n[1] * n[1]).sqrt();
        (len > 0.0).then(|| [n[0] / len, n[1] / len])
    })
}

/// Gap between convex polygons: exact distance when separated, `≤ 0` when
/// they touch or overlap (separating axis test).
fn polygon_gap(p: &[[f64; 2]], q: &[[f64; 2]]) -> f64 {
    let mut separated = false;
    for axis in edge_normals(p).chain(edge_normals(q)) {
        let (a, b) = project(p, axis);
        let (c, d) = project(q, axis);
        if c > b || a > d {
            separated = true;
            break;
        }
    }
    if !separated {
        return 0.0_f64.min(-f64::MIN_POSITIVE);
    }
    let mut best = f64::INFINITY;
    for &v in p {
        best = best.min(point_boundary_distance(v, q));
    }
    for &v in q {
        best = best.min(point_boundary_distance(v, p));
    }
    best
}

fn point_segment_distance(x: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ax = [x[0] - a[0], x[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 { ((ax[0] * ab[0] + ax[1] * ab[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
    dist2(x, [a[0] + t * ab[0], a[1] + t * ab[1]])
}

fn point_boundary_distance(x: [f64; 2], poly: &[[f64; 2]]) -> f64 {
    (0..poly.len())
        .map(|i| point_segment_distance(x, poly[i], poly[(i + 1) % poly.len()]))
        .fold(f64::INFINITY, f64::min)
}

fn point_in_convex(x: [f64; 2], poly: &[[f64; 2]]) -> bool {
    let mut sign = 0.0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let cross = (b[0] - a[0]) * (x[1] - a[1]) - (b[1] - a[1]) * (x[0] - a[0]);
        if cross != 0.0 {
            if sign == 0.0 {
                sign = cross.signum();
            } else if cross.signum() != sign {
                return false;
            }
        }
    }
    true
}

fn point_polygon_distance(x: [f64; 2], poly: &[[f64; 2]]) -> f64 {
    if point_in_convex(x, poly) {
        0.0
    } else {
        point_boundary_distance(x, poly)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(x: f64, y: f64, s: f64) -> Region {
        Region::Polygon(vec![[x, y], [x + s, y], [x + s, y + s], [x, y + s]])
    }

    #[test]
    fn interval_gaps() {
        let a = Region::Interval { lo: 0.0, hi: 1.0 / 3.0 };
        let b = Region::Interval { lo: 2.0 / 3.0, hi: 1.0 };
        assert!((a.separation(&b) - 1.0 / 3.0).abs() < 1e-15);
        let c = Region::Interval { lo: 0.5, hi: 1.0 };
        let d = Region::Interval { lo: 0.0, hi: 0.5 };
        assert_eq!(c.separation(&d), 0.0);
    }

    #[test]
    fn polygon_gaps() {
        let a = square(0.0, 0.0, 1.0);
        let b = square(2.0, 0.5, 1.0);
        assert!((a.separation(&b) - 1.0).abs() < 1e-12);
        let c = square(1.0, 0.0, 1.0);
        assert!(a.separation(&c) <= 0.0);
        let diamond = Region::Polygon(vec![[3.0, 0.0], [4.0, 1.0], [3.0, 2.0], [2.0, 1.0]]);
        assert!((a.separation(&diamond) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn box_tests() {
        let s = square(0.1, 0.1, 0.2);
        assert!(s.inside_box(&[0.0, 0.0], &[0.5, 0.5]));
        assert!(!s.inside_box(&[0.0, 0.0], &[0.3, 0.5]));
        assert!(s.meets_box(&[0.25, 0.25], &[0.5, 0.5]));
        assert!(!s.meets_box(&[0.31, 0.0], &[0.5, 0.5]));
        let b = Region::ball(vec![0.0, 0.0], 1.0);
        assert!(b.meets_box(&[0.7, 0.7], &[2.0, 2.0]));
        assert!(!b.meets_box(&[0.8, 0.8], &[2.0, 2.0]));
    }
}
