use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::PointCloud;

/// Default pair budget; above it pairs are subsampled.
pub const DEFAULT_PAIR_CAP: u64 = 20_000_000;
const PAIR_CHUNK: u64 = 1 << 16;

/// Evaluate `f` on every unordered pair `i < j` when there are at most `cap`
/// of them, otherwise on `cap` uniformly drawn pairs. Output order is fixed
/// by the seed alone.
fn pair_values<T, F>(cloud: &PointCloud, cap: u64, seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&[f64], &[f64]) -> Option<T> + Sync,
{
    let n = cloud.len();
    if n < 2 {
        return Err(Error::input("pair statistics need at least two points"));
    }
    if cap == 0 {
        return Err(Error::input("pair cap must be positive"));
    }
    let total = n as u64 * (n as u64 - 1) / 2;
    if total <= cap {
        let rows: Vec<Vec<T>> = (0..n)
            .into_par_iter()
            .map(|i| ((i + 1)..n).filter_map(|j| f(cloud.point(i), cloud.point(j))).collect())
            .collect();
        return Ok(rows.into_iter().flatten().collect());
    }
    let chunks: Vec<Vec<T>> = (0..cap.div_ceil(PAIR_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let count = PAIR_CHUNK.min(cap - c * PAIR_CHUNK);
            (0..count)
                .filter_map(|_| {
                    let i = rng.gen_range(0..n);
                    let mut j = rng.gen_range(0..n - 1);
                    if j >= i {
                        j += 1;
                    }
                    f(cloud.point(i.min(j)), cloud.point(i.max(j)))
                })
                .collect()
        })
        .collect();
    Ok(chunks.into_iter().flatten().collect())
}

fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
}

/// Pairwise distances `|x − y|`.
pub fn distance_set(cloud: &PointCloud, pair_cap: u64, seed: u64) -> Result<Vec<f64>> {
    pair_values(cloud, pair_cap, seed, |x, y| Some(distance(x, y)))
}

/// Direction of `x − y` in `[0, 2π)`.
fn direction(x: &[f64], y: &[f64]) -> Option<f64> {
    let (dx, dy) = (x[0] - y[0], x[1] - y[1]);
    if dx == 0.0 && dy == 0.0 {
        return None;
    }
    // rem_euclid rounds tiny negative angles up to exactly 2π
    Some(dy.atan2(dx).rem_euclid(2.0 * PI) % (2.0 * PI))
}

fn require_planar(cloud: &PointCloud) -> Result<()> {
    if cloud.dim() != 2 {
        return Err(Error::Unsupported(format!("direction sets are planar; cloud has dimension {}", cloud.dim())));
    }
    Ok(())
}

/// Undirected pair directions folded to `[0, π)`.
pub fn direction_set(cloud: &PointCloud, pair_cap: u64, seed: u64) -> Result<Vec<f64>> {
    directions(cloud, pair_cap, seed, true)
}

/// Directions of `x − y` on the whole circle `[0, 2π)`, for pairs `i < j`.
pub fn direction_set_circle(cloud: &PointCloud, pair_cap: u64, seed: u64) -> Result<Vec<f64>> {
    directions(cloud, pair_cap, seed, false)
}

fn directions(cloud: &PointCloud, pair_cap: u64, seed: u64, fold: bool) -> Result<Vec<f64>> {
    require_planar(cloud)?;
    let out = pair_values(cloud, pair_cap, seed, |x, y| {
        direction(x, y).map(|a| if fold { a.rem_euclid(PI) % PI } else { a })
    })?;
    if out.is_empty() {
        return Err(Error::Degenerate("all points coincide: no direction".into()));
    }
    Ok(out)
}

/// Largest gap between consecutive angles on a circle of the given period.
/// A set is `ε`-dense iff this gap is at most `2ε`.
pub fn largest_angular_gap(angles: &[f64], period: f64) -> f64 {
    if angles.is_empty() {
        return period;
    }
    let mut a: Vec<f64> = angles.iter().map(|x| x.rem_euclid(period)).collect();
    a.sort_by(f64::total_cmp);
    let wrap = a[0] + period - a[a.len() - 1];
    a.windows(2).map(|w| w[1] - w[0]).fold(wrap, f64::max)
}

/// A closed arc on the unit circle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub center: f64,
    pub width: f64,
}

impl Arc {
    pub fn new(center: f64, width: f64) -> Result<Self> {
        if !(width > 0.0) || !center.is_finite() {
            return Err(Error::input("arcs need a finite center and positive width"));
        }
        Ok(Arc { center, width: width.min(2.0 * PI) })
    }

    pub fn full() -> Self {
        Arc { center: 0.0, width: 2.0 * PI }
    }

    pub fn contains(&self, angle: f64) -> bool {
        let d = (angle - self.center).rem_euclid(2.0 * PI);
        d.min(2.0 * PI - d) <= self.width / 2.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RestrictedDistances {
    pub distances: Vec<f64>,
    pub warning: Option<String>,
}

/// Distances of pairs with `(x − y)/|x − y|` in one of the arcs, for either
/// order of the pair.
pub fn restricted_distance_set(
    cloud: &PointCloud,
    arcs: &[Arc],
    pair_cap: u64,
    seed: u64,
) -> Result<RestrictedDistances> {
    require_planar(cloud)?;
    if arcs.is_empty() {
        return Err(Error::input("restricted distance set needs at least one arc"));
    }
    let distances = pair_values(cloud, pair_cap, seed, |x, y| {
        let a = direction(x, y)?;
        let b = (a + PI).rem_euclid(2.0 * PI);
        arcs.iter().any(|c| c.contains(a) || c.contains(b)).then(|| distance(x, y))
    })?;
    let warning = distances.is_empty().then(|| "no pair has a direction in the given arcs".to_string());
    Ok(RestrictedDistances { distances, warning })
}

/// One-dimensional cloud of equally weighted values.
pub fn values_cloud(values: Vec<f64>) -> Result<PointCloud> {
    PointCloud::uniform(1, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_distance_sets() {
        let two = PointCloud::uniform(1, vec![0.0, 1.0]).unwrap();
        assert_eq!(distance_set(&two, 10, 0).unwrap(), vec![1.0]);
        let three = PointCloud::uniform(1, vec![0.0, 0.5, 1.0]).unwrap();
        let mut d = distance_set(&three, 10, 0).unwrap();
        d.sort_by(f64::total_cmp);
        d.dedup();
        assert_eq!(d, vec![0.5, 1.0]);
    }

    #[test]
    fn horizontal_segment_directions() {
        let seg = PointCloud::uniform(2, (0..50).flat_map(|i| [i as f64 / 50.0, 0.3]).collect()).unwrap();
        let dirs = direction_set(&seg, 10_000, 0).unwrap();
        assert!(dirs.iter().all(|&a| a == 0.0));
        let vertical = restricted_distance_set(&seg, &[Arc::new(PI / 2.0, 0.2).unwrap()], 10_000, 0).unwrap();
        assert!(vertical.distances.is_empty());
        assert!(vertical.warning.is_some());
    }

    #[test]
    fn arcs_wrap_around() {
        let a = Arc::new(0.0, 0.2).unwrap();
        assert!(a.contains(2.0 * PI - 0.05));
        assert!(!a.contains(0.2));
        assert!(Arc::full().contains(3.0));
    }

    #[test]
    fn sampled_pairs_are_reproducible() {
        let cloud = PointCloud::uniform(2, (0..400).map(|i| ((i * 37) % 101) as f64 / 101.0).collect()).unwrap();
        let a = distance_set(&cloud, 1000, 9).unwrap();
        assert_eq!(a.len(), 1000);
        assert_eq!(a, distance_set(&cloud, 1000, 9).unwrap());
        assert_ne!(a, distance_set(&cloud, 1000, 10).unwrap());
    }

    #[test]
    fn coincident_points_have_no_direction() {
        let same = PointCloud::uniform(2, vec![0.5; 6]).unwrap();
        assert!(direction_set(&same, 100, 0).is_err());
    }
}
