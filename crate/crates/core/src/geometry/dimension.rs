use std::collections::HashSet;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gibbs::GibbsModel;
use crate::ifs::{check_strong_separation, IfsSystem};
use crate::output;
use crate::PointCloud;

/// Geometric levels in the default box-counting ladder.
pub const BOX_LEVELS: usize = 12;
/// Levels kept for the fit, dropping the same number at each end.
pub const BOX_FIT_LEVELS: usize = 8;
/// Finest default box side relative to the cloud diameter.
pub const BOX_MIN_FRACTION: f64 = 1.0 / 16384.0;
/// Boxes finer than this are saturated: fewer than this many points per box
/// on average.
pub const SATURATION_POINTS_PER_BOX: f64 = 20.0;
/// Points used by the regression estimators at minimum.
pub const MIN_CLOUD_POINTS: usize = 1000;
/// Neighbors expected inside the smallest default local-dimension ball.
pub const LOCAL_MIN_NEIGHBORS: usize = 50;
/// Radii in the default local-dimension ladder.
pub const LOCAL_LEVELS: usize = 8;
/// Bitsets for box counting are used below this many cells.
const BITSET_CELLS: f64 = (1u64 << 31) as f64;

const CAVEAT: &str = "box-count estimate at desk scale, not a Hausdorff dimension";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    BoxCount,
    LocalDim,
    ExactFormula,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::BoxCount => "box_count",
            Method::LocalDim => "local_dim",
            Method::ExactFormula => "exact_formula",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DimensionEstimate {
    pub value: f64,
    /// `(log 1/r, log N(r))` for box counts, `(log 1/r, mean log 1/μ(B(x,r)))`
    /// for local dimension. Only the fitted scales are listed.
    pub scales: Vec<(f64, f64)>,
    pub slope_stderr: f64,
    pub method: Method,
    pub warnings: Vec<String>,
}

impl DimensionEstimate {
    fn exact(value: f64) -> Self {
        DimensionEstimate { value, scales: Vec::new(), slope_stderr: 0.0, method: Method::ExactFormula, warnings: Vec::new() }
    }

    fn degenerate(method: Method, why: &str) -> Self {
        DimensionEstimate { value: 0.0, scales: Vec::new(), slope_stderr: 0.0, method, warnings: vec![why.to_string()] }
    }

    /// `method,value,stderr,n_scales`, then `log_inv_r,log_count` per scale.
    pub fn to_csv(&self) -> String {
        let mut out = output::row(["method", "value", "stderr", "n_scales"]);
        out.push_str(&output::row([
            self.method.name().to_string(),
            output::num(self.value),
            output::num(self.slope_stderr),
            self.scales.len().to_string(),
        ]));
        out.push_str(&output::row(["log_inv_r", "log_count"]));
        for &(x, y) in &self.scales {
            out.push_str(&output::row([output::num(x), output::num(y)]));
        }
        out
    }
}

/// Least-squares slope and its standard error.
pub(crate) fn fit_line(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return (0.0, f64::INFINITY);
    }
    let slope = sxy / sxx;
    let stderr = if points.len() > 2 {
        let rss: f64 = points.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum();
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    (slope, stderr)
}

fn geometric_ladder(r_max: f64, r_min: f64, levels: usize) -> Vec<f64> {
    if levels == 1 {
        return vec![r_max];
    }
    let step = (r_min / r_max).ln() / (levels - 1) as f64;
    (0..levels).map(|i| r_max * (step * i as f64).exp()).collect()
}

/// Round each side to `L/m` for the longest extent `L` and integer `m`, so
/// the grid tiles the bounding box along that axis. Repeated scales are
/// dropped.
fn snap_ladder(extent: &[f64], radii: Vec<f64>) -> Vec<f64> {
    let l = extent.iter().copied().fold(0.0, f64::max);
    let mut out: Vec<f64> = Vec::with_capacity(radii.len());
    for r in radii {
        let snapped = l / (l / r).round().max(1.0);
        if out.last().is_none_or(|&p| snapped < p) {
            out.push(snapped);
        }
    }
    out
}

/// Number of occupied boxes of side `r` in a grid anchored at `lo`.
pub fn box_count(cloud: &PointCloud, lo: &[f64], extent: &[f64], r: f64) -> usize {
    let d = cloud.dim();
    // a point on the upper face joins the last box, so `L/m` tiles exactly
    let sides: Vec<u64> = extent.iter().map(|e| ((e / r) * (1.0 - 1e-12)).ceil().max(1.0) as u64).collect();
    let cells: f64 = sides.iter().map(|&s| s as f64).product();
    let key = |p: &[f64]| -> Vec<u64> {
        p.iter().zip(lo).zip(&sides).map(|((x, l), &s)| (((x - l) / r).floor().max(0.0) as u64).min(s - 1)).collect()
    };
    if cells <= BITSET_CELLS {
        let mut bits = vec![0u64; (cells as usize).div_ceil(64)];
        let mut count = 0;
        for p in cloud.points().map(|(p, _)| p) {
            let mut idx = 0u64;
            for j in 0..d {
                let v = (((p[j] - lo[j]) / r).floor().max(0.0) as u64).min(sides[j] - 1);
                idx = idx * sides[j] + v;
            }
            let (word, bit) = ((idx / 64) as usize, idx % 64);
            if bits[word] >> bit & 1 == 0 {
                bits[word] |= 1 << bit;
                count += 1;
            }
        }
        count
    } else {
        let mut seen: HashSet<Vec<u64>> = HashSet::with_capacity(cloud.len().min(1 << 20));
        for p in cloud.points().map(|(p, _)| p) {
            seen.insert(key(p));
        }
        seen.len()
    }
}

/// Box-counting dimension over `levels` geometric scales from `r_max` down
/// to `r_min`, fitted over all of them.
pub fn box_dimension(cloud: &PointCloud, r_min: f64, r_max: f64, levels: usize) -> Result<DimensionEstimate> {
    box_dimension_with(cloud, r_min, r_max, levels, 0, None)
}

/// Box-counting dimension on the default ladder: twelve levels between
/// `diam/4` and `max(10·resolution, diam/16384, saturation scale)`, fitted
/// over the middle eight. The saturation scale is the finest box side at
/// which boxes still hold twenty points on average.
pub fn box_dimension_auto(cloud: &PointCloud, resolution: Option<f64>) -> Result<DimensionEstimate> {
    let Some((lo, extent, diam)) = geometry_of(cloud)? else {
        return Ok(DimensionEstimate::degenerate(Method::BoxCount, "degenerate cloud: a single point"));
    };
    let r_max = diam / 4.0;
    let mut r_min = (diam * BOX_MIN_FRACTION).max(resolution.map_or(0.0, |r| 10.0 * r));
    let limit = cloud.len() as f64 / SATURATION_POINTS_PER_BOX;
    // counts grow as boxes shrink, so the first saturated probe is found by
    // bisection
    let probe = geometric_ladder(r_max, r_min, 2 * BOX_LEVELS);
    let saturated = |i: usize| box_count(cloud, &lo, &extent, probe[i]) as f64 > limit;
    if saturated(probe.len() - 1) {
        let (mut ok, mut bad) = (0, probe.len() - 1);
        while bad - ok > 1 {
            let mid = (ok + bad) / 2;
            if saturated(mid) {
                bad = mid;
            } else {
                ok = mid;
            }
        }
        r_min = probe[ok.max(1)];
    }
    let trim = (BOX_LEVELS - BOX_FIT_LEVELS) / 2;
    let mut est = box_dimension_with(cloud, r_min, r_max, BOX_LEVELS, trim, resolution)?;
    est.warnings.push(CAVEAT.to_string());
    Ok(est)
}

fn geometry_of(cloud: &PointCloud) -> Result<Option<(Vec<f64>, Vec<f64>, f64)>> {
    let (lo, hi) = cloud.bbox().ok_or_else(|| Error::input("empty cloud"))?;
    let extent: Vec<f64> = hi.iter().zip(&lo).map(|(h, l)| h - l).collect();
    let diam = extent.iter().map(|e| e * e).sum::<f64>().sqrt();
    Ok(if diam > 0.0 { Some((lo, extent, diam)) } else { None })
}

fn box_dimension_with(
    cloud: &PointCloud,
    r_min: f64,
    r_max: f64,
    levels: usize,
    trim: usize,
    resolution: Option<f64>,
) -> Result<DimensionEstimate> {
    if !(r_min > 0.0 && r_min < r_max) {
        return Err(Error::input("box sizes need 0 < r_min < r_max"));
    }
    if levels < 5 + 2 * trim {
        return Err(Error::input("box counting needs at least 5 fitted scales"));
    }
    let Some((lo, extent, _)) = geometry_of(cloud)? else {
        return Ok(DimensionEstimate::degenerate(Method::BoxCount, "degenerate cloud: a single point"));
    };
    let mut warnings = Vec::new();
    if cloud.len() < MIN_CLOUD_POINTS {
        warnings.push(format!("only {} points; at least {MIN_CLOUD_POINTS} recommended", cloud.len()));
    }
    if let Some(res) = resolution {
        if r_min < 10.0 * res {
            warnings.push(format!("r_min {r_min:e} is below ten times the sampling resolution {res:e}"));
        }
    }
    let radii = snap_ladder(&extent, geometric_ladder(r_max, r_min, levels));
    if radii.len() < 5 + 2 * trim {
        return Err(Error::input("box ladder collapses to fewer than 5 distinct scales"));
    }
    let levels = radii.len();
    let scales: Vec<(f64, f64)> = radii[trim..levels - trim]
        .par_iter()
        .map(|&r| (-r.ln(), (box_count(cloud, &lo, &extent, r) as f64).ln()))
        .collect();
    let (slope, stderr) = fit_line(&scales);
    Ok(DimensionEstimate {
        value: clamp_dimension(slope, cloud.dim(), &mut warnings),
        scales,
        slope_stderr: stderr,
        method: Method::BoxCount,
        warnings,
    })
}

fn clamp_dimension(v: f64, d: usize, warnings: &mut Vec<String>) -> f64 {
    if v < 0.0 || v > d as f64 {
        warnings.push(format!("raw slope {v} clamped to [0, {d}]"));
    }
    v.clamp(0.0, d as f64)
}

/// `h/λ` for a Gibbs measure on a strongly separated similarity system:
/// the Markov entropy rate over the mean contraction exponent under the
/// stationary symbol distribution.
pub fn exact_measure_dimension(sys: &IfsSystem, g: &GibbsModel) -> Result<DimensionEstimate> {
    if g.system() != sys.symbolic() {
        return Err(Error::input("Gibbs model is built on a different subshift"));
    }
    if !sys.is_similarity() {
        return Err(Error::Unsupported("exact measure dimension needs similarities; use local_dimension".into()));
    }
    if !check_strong_separation(sys, 2)?.is_pass() {
        return Err(Error::Unsupported("strong separation is not certified".into()));
    }
    let h = g.entropy_rate();
    let lambda: f64 = g
        .symbol_masses()
        .iter()
        .enumerate()
        .map(|(i, p)| -p * sys.similarity(i).expect("similarity system").ratio().ln())
        .sum();
    Ok(DimensionEstimate::exact(h / lambda))
}

/// Mean slope of `log μ(B(x,r))` against `log r` over `n_centers` centers
/// drawn from the cloud. The default ladder runs from `diam/8` down to the
/// median radius holding fifty neighbors.
pub fn local_dimension(
    cloud: &PointCloud,
    n_centers: usize,
    radii: Option<&[f64]>,
    seed: u64,
) -> Result<DimensionEstimate> {
    if n_centers == 0 {
        return Err(Error::input("local dimension needs at least one center"));
    }
    let Some((_, _, diam)) = geometry_of(cloud)? else {
        return Ok(DimensionEstimate::degenerate(Method::LocalDim, "point mass: every ball holds all the mass"));
    };
    let n = cloud.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = sample(&mut rng, n, n_centers.min(n)).into_vec();
    centers.sort_unstable();
    let total = cloud.total_weight();
    let mut warnings = Vec::new();

    let dist_from = |c: usize| -> Vec<f64> {
        let x = cloud.point(c);
        cloud.points().map(|(p, _)| p.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()).collect()
    };
    let ladder: Vec<f64> = match radii {
        Some(r) => {
            if r.len() < 5 || r.iter().any(|&v| !(v > 0.0)) {
                return Err(Error::input("radius ladder needs at least 5 positive radii"));
            }
            r.to_vec()
        }
        None => {
            let k = LOCAL_MIN_NEIGHBORS.min(n - 1);
            let mut rk: Vec<f64> = centers
                .par_iter()
                .map(|&c| {
                    let mut d = dist_from(c);
                    *d.select_nth_unstable_by(k, f64::total_cmp).1
                })
                .collect();
            rk.sort_by(f64::total_cmp);
            let r_max = diam / 8.0;
            let mut r_min = rk[rk.len() / 2];
            if !(r_min < r_max / 4.0) {
                warnings.push("insufficient mass resolution: ladder widened".to_string());
                r_min = r_max / 4.0;
            }
            geometric_ladder(r_max, r_min, LOCAL_LEVELS)
        }
    };
    // per center: log masses on the ladder
    let rows: Vec<Vec<f64>> = centers
        .par_iter()
        .map(|&c| {
            let d = dist_from(c);
            ladder
                .iter()
                .map(|&r| {
                    let m: f64 = d.iter().zip(cloud.weights()).filter(|(x, _)| **x <= r).map(|(_, w)| w).sum();
                    (m / total).ln()
                })
                .collect()
        })
        .collect();
    let slopes: Vec<f64> = rows
        .iter()
        .map(|row| {
            let pts: Vec<(f64, f64)> = ladder.iter().zip(row).map(|(r, m)| (r.ln(), *m)).collect();
            fit_line(&pts).0
        })
        .collect();
    let mean = slopes.iter().sum::<f64>() / slopes.len() as f64;
    let sd = if slopes.len() > 1 {
        (slopes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (slopes.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    let scales = ladder
        .iter()
        .enumerate()
        .map(|(j, r)| (-r.ln(), -rows.iter().map(|row| row[j]).sum::<f64>() / rows.len() as f64))
        .collect();
    Ok(DimensionEstimate {
        value: clamp_dimension(mean, cloud.dim(), &mut warnings),
        scales,
        slope_stderr: sd / (slopes.len() as f64).sqrt(),
        method: Method::LocalDim,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_fit_recovers_slope() {
        let pts: Vec<(f64, f64)> = (0..6).map(|i| (i as f64, 2.0 * i as f64 + 1.0)).collect();
        let (s, e) = fit_line(&pts);
        assert!((s - 2.0).abs() < 1e-12);
        assert!(e < 1e-12);
    }

    #[test]
    fn grid_is_two_dimensional() {
        let m = 400;
        let coords: Vec<f64> = (0..m * m)
            .flat_map(|i| [((i % m) as f64 + 0.5) / m as f64, ((i / m) as f64 + 0.5) / m as f64])
            .collect();
        let cloud = PointCloud::uniform(2, coords).unwrap();
        let est = box_dimension_auto(&cloud, None).unwrap();
        assert!((est.value - 2.0).abs() < 0.05, "{}", est.value);
        assert_eq!(est.scales.len(), BOX_FIT_LEVELS);
    }

    #[test]
    fn single_point_is_zero() {
        let cloud = PointCloud::uniform(2, vec![0.3, 0.3, 0.3, 0.3]).unwrap();
        let est = box_dimension_auto(&cloud, None).unwrap();
        assert_eq!(est.value, 0.0);
        assert!(!est.warnings.is_empty());
        assert_eq!(local_dimension(&cloud, 5, None, 1).unwrap().value, 0.0);
    }

    #[test]
    fn bitset_and_hash_counts_agree() {
        let coords: Vec<f64> = (0..500).map(|i| ((i * 7919) % 1000) as f64 / 1000.0).collect();
        let cloud = PointCloud::uniform(2, coords).unwrap();
        let (lo, hi) = cloud.bbox().unwrap();
        let ext: Vec<f64> = hi.iter().zip(&lo).map(|(h, l)| h - l).collect();
        let fine = box_count(&cloud, &lo, &ext, 1e-6);
        let distinct: HashSet<Vec<u64>> = cloud.points().map(|(p, _)| p.iter().map(|v| v.to_bits()).collect()).collect();
        assert_eq!(fine, distinct.len());
    }
}
