use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Ambient compact set `X` that every map sends into itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    /// The unit cube `[0,1]^dim`; with `dim = 2` it is the unit square of
    /// the complex plane for conformal systems.
    Cube { dim: usize },
    /// Closed planar annulus `r_in ≤ |z − center| ≤ r_out`.
    Annulus { center: [f64; 2], r_in: f64, r_out: f64 },
}

/// Grid resolution per side for conformal derivative sampling.
const SQUARE_GRID: usize = 41;
const ANNULUS_RADII: usize = 21;
const ANNULUS_ANGLES: usize = 160;

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Cube { dim } => *dim,
            Domain::Annulus { .. } => 2,
        }
    }

    pub fn center(&self) -> Vec<f64> {
        match self {
            Domain::Cube { dim } => vec![0.5; *dim],
            // A point on the middle circle: the geometric center is not in X.
            Domain::Annulus { center, r_in, r_out } => {
                vec![center[0] + 0.5 * (r_in + r_out), center[1]]
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Domain::Cube { dim } => (*dim as f64).sqrt(),
            Domain::Annulus { r_out, .. } => 2.0 * r_out,
        }
    }

    /// Upper bound on the length of a shortest path inside `X` between two
    /// of its points.
    pub fn path_diameter(&self) -> f64 {
        match self {
            Domain::Cube { .. } => self.diameter(),
            Domain::Annulus { r_out, .. } => std::f64::consts::PI * r_out,
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        match self {
            Domain::Cube { .. } => x.iter().all(|&v| v >= -tol && v <= 1.0 + tol),
            Domain::Annulus { center, r_in, r_out } => {
                let r = ((x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2)).sqrt();
                r >= r_in - tol && r <= r_out + tol
            }
        }
    }

    /// Distance from `z` to the set (zero inside).
    pub fn distance_to(&self, z: Complex64) -> f64 {
        match self {
            Domain::Cube { .. } => {
                let dx = (-z.re).max(z.re - 1.0).max(0.0);
                let dy = (-z.im).max(z.im - 1.0).max(0.0);
                dx.hypot(dy)
            }
            Domain::Annulus { center, r_in, r_out } => {
                let r = (z - Complex64::new(center[0], center[1])).norm();
                (r_in - r).max(r - r_out).max(0.0)
            }
        }
    }

    /// Largest distance from `z` to a point of the set.
    pub fn max_distance_to(&self, z: Complex64) -> f64 {
        match self {
            Domain::Cube { .. } => [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)]
                .iter()
                .map(|&(x, y)| (z - Complex64::new(x, y)).norm())
                .fold(0.0, f64::max),
            Domain::Annulus { center, r_out, .. } => {
                (z - Complex64::new(center[0], center[1])).norm() + r_out
            }
        }
    }

    /// Grid of planar sample points together with its covering radius: every
    /// point of the set is within that distance of some grid point.
    pub fn planar_grid(&self) -> (Vec<Complex64>, f64) {
        match self {
            Domain::Cube { .. } => {
                let n = SQUARE_GRID;
                let h = 1.0 / (n - 1) as f64;
                let pts = (0..n)
                    .flat_map(|i| (0..n).map(move |j| Complex64::new(i as f64 * h, j as f64 * h)))
                    .collect();
                (pts, h * std::f64::consts::FRAC_1_SQRT_2)
            }
            Domain::Annulus { center, r_in, r_out } => {
                let c = Complex64::new(center[0], center[1]);
                let dr = (r_out - r_in) / (ANNULUS_RADII - 1) as f64;
                let dt = std::f64::consts::TAU / ANNULUS_ANGLES as f64;
                let mut pts = Vec::with_capacity(ANNULUS_RADII * ANNULUS_ANGLES);
                for i in 0..ANNULUS_RADII {
                    let r = r_in + i as f64 * dr;
                    for j in 0..ANNULUS_ANGLES {
                        pts.push(c + Complex64::from_polar(r, j as f64 * dt));
                    }
                }
                // Half a radial step plus half an outer chord.
                let chord = 2.0 * r_out * (dt / 2.0).sin();
                (pts, (0.5 * dr).hypot(0.5 * chord))
            }
        }
    }

    /// Points on the boundary, used to check that maps send `X` into itself.
    pub fn boundary_samples(&self, n: usize) -> Vec<Vec<f64>> {
        match self {
            Domain::Cube { dim } => {
                let d = *dim;
                if d > 3 {
                    return (0..1usize << d)
                        .map(|m| (0..d).map(|k| ((m >> k) & 1) as f64).collect())
                        .collect();
                }
                let mut out = Vec::new();
                let t = |i: usize| i as f64 / n as f64;
                match d {
                    1 => {
                        out.push(vec![0.0]);
                        out.push(vec![1.0]);
                    }
                    2 => {
                        for i in 0..=n {
                            out.push(vec![t(i), 0.0]);
                            out.push(vec![t(i), 1.0]);
                            out.push(vec![0.0, t(i)]);
                            out.push(vec![1.0, t(i)]);
                        }
                    }
                    _ => {
                        for m in 0..8usize {
                            out.push((0..3).map(|k| ((m >> k) & 1) as f64).collect());
                        }
                    }
                }
                out
            }
            Domain::Annulus { center, r_in, r_out } => {
                let mut out = Vec::new();
                for j in 0..4 * n {
                    let t = j as f64 / (4 * n) as f64 * std::f64::consts::TAU;
                    for r in [r_in, r_out] {
                        out.push(vec![center[0] + r * t.cos(), center[1] + r * t.sin()]);
                    }
                }
                out
            }
        }
    }
}
