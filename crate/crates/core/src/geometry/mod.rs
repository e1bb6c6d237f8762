//! Projections, distance and direction sets, and dimension estimators.
//!
//! Hausdorff dimension is not computable from finite samples; estimates
//! here are box counts at desk scale, with exact `h/λ` and Moran values for
//! strongly separated similarity systems.

mod dimension;
mod minimality;
mod pairs;
mod projection;

pub use dimension::{
    box_count, box_dimension, box_dimension_auto, exact_measure_dimension, local_dimension, DimensionEstimate,
    Method, BOX_FIT_LEVELS, BOX_LEVELS,
};
pub use minimality::{minimality_density, MinimalityReport, MAX_ANGLE_STATES};
pub use pairs::{
    direction_set, direction_set_circle, distance_set, largest_angular_gap, restricted_distance_set, values_cloud,
    Arc, RestrictedDistances, DEFAULT_PAIR_CAP,
};
pub use projection::{project, sweep_cloud, ProjectionSpec, ProjectionSweep, SweepRow};

use crate::error::Result;
use crate::gibbs::GibbsModel;
use crate::ifs::{check_strong_separation, sample_measure, similarity_dimension, IfsSystem};

/// Smallest scale a depth-`depth` sample resolves: every point lies within
/// `ρ^depth·diam(X)` of the attractor.
pub fn sampling_resolution(sys: &IfsSystem, depth: usize) -> f64 {
    sys.max_ratio().powi(depth as i32) * sys.domain().diameter()
}

/// Sample `points` points of the Gibbs measure at `depth` and sweep
/// projections over `angles` lines. The prediction uses the similarity
/// dimension when strong separation is certified.
pub fn projection_sweep(
    sys: &IfsSystem,
    g: &GibbsModel,
    angles: usize,
    depth: usize,
    points: usize,
    seed: u64,
) -> Result<ProjectionSweep> {
    let cloud = sample_measure(sys, g, points, depth, seed)?;
    let reference = if sys.is_similarity() && check_strong_separation(sys, 2)?.is_pass() {
        Some(similarity_dimension(sys)?)
    } else {
        None
    };
    sweep_cloud(&cloud, angles, Some(sampling_resolution(sys, depth)), reference)
}
