use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::output;
use crate::PointCloud;

use super::dimension::{box_dimension_auto, DimensionEstimate};

/// Orthogonal projection `R^d → R^k` given by a row-orthonormal `k×d` frame.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProjectionSpec {
    d: usize,
    k: usize,
    frame: Vec<f64>,
    theta: Option<f64>,
}

impl ProjectionSpec {
    pub fn new(d: usize, k: usize, frame: Vec<f64>) -> Result<Self> {
        if k == 0 || k >= d {
            return Err(Error::input(format!("projection needs 0 < k < d, got k={k}, d={d}")));
        }
        if frame.len() != k * d {
            return Err(Error::input(format!("frame must have {} entries", k * d)));
        }
        for a in 0..k {
            for b in 0..k {
                let dot: f64 = (0..d).map(|j| frame[a * d + j] * frame[b * d + j]).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                if (dot - want).abs() > 1e-12 {
                    return Err(Error::input("projection frame rows are not orthonormal"));
                }
            }
        }
        Ok(ProjectionSpec { d, k, frame, theta: None })
    }

    /// Planar projection onto the line at angle `θ`, reduced to `[0, π)`.
    pub fn angle(theta: f64) -> Self {
        let t = theta.rem_euclid(PI);
        ProjectionSpec { d: 2, k: 1, frame: vec![t.cos(), t.sin()], theta: Some(t) }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn frame(&self) -> &[f64] {
        &self.frame
    }

    pub fn theta(&self) -> Option<f64> {
        self.theta
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.k).map(|a| (0..self.d).map(|j| self.frame[a * self.d + j] * x[j]).sum()).collect()
    }
}

/// Apply the frame to every point, keeping the weights.
pub fn project(cloud: &PointCloud, spec: &ProjectionSpec) -> Result<PointCloud> {
    if cloud.dim() != spec.d {
        return Err(Error::input(format!(
            "cloud dimension {} does not match projection dimension {}",
            cloud.dim(),
            spec.d
        )));
    }
    let coords: Vec<f64> = cloud.points().flat_map(|(p, _)| spec.apply(p)).collect();
    PointCloud::new(spec.k, coords, cloud.weights().to_vec())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub theta: f64,
    pub estimate: DimensionEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProjectionSweep {
    pub rows: Vec<SweepRow>,
    pub min_value: f64,
    /// Box dimension of the unprojected cloud.
    pub full: DimensionEstimate,
    /// `min{1, reference}` when a reference dimension was supplied.
    pub predicted: Option<f64>,
}

impl ProjectionSweep {
    /// `theta,value,stderr`, one row per angle.
    pub fn to_csv(&self) -> String {
        let mut out = output::row(["theta", "value", "stderr"]);
        for r in &self.rows {
            out.push_str(&output::row([
                output::num(r.theta),
                output::num(r.estimate.value),
                output::num(r.estimate.slope_stderr),
            ]));
        }
        out
    }
}

/// Box dimension of the projection onto each of `angles` equally spaced
/// lines `θ = iπ/angles`. `reference` is a dimension for the full set, such
/// as the similarity or exact measure dimension.
pub fn sweep_cloud(
    cloud: &PointCloud,
    angles: usize,
    resolution: Option<f64>,
    reference: Option<f64>,
) -> Result<ProjectionSweep> {
    if cloud.dim() != 2 {
        return Err(Error::Unsupported("projection sweeps are planar".into()));
    }
    if angles == 0 {
        return Err(Error::input("sweep needs at least one angle"));
    }
    let full = box_dimension_auto(cloud, resolution)?;
    let rows = (0..angles)
        .map(|i| {
            let theta = i as f64 * PI / angles as f64;
            let p = project(cloud, &ProjectionSpec::angle(theta))?;
            Ok(SweepRow { theta, estimate: box_dimension_auto(&p, resolution)? })
        })
        .collect::<Result<Vec<_>>>()?;
    let min_value = rows.iter().map(|r| r.estimate.value).fold(f64::INFINITY, f64::min);
    Ok(ProjectionSweep { rows, min_value, full, predicted: reference.map(|r| r.min(1.0)) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinate_projection() {
        let cloud = PointCloud::uniform(2, vec![0.2, 0.9, 0.4, 0.1]).unwrap();
        let p = project(&cloud, &ProjectionSpec::angle(0.0)).unwrap();
        assert_eq!(p.coords(), &[0.2, 0.4]);
        assert!(project(&p, &ProjectionSpec::angle(0.0)).is_err());
    }

    #[test]
    fn frames_must_be_orthonormal() {
        assert!(ProjectionSpec::new(3, 2, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0]).is_ok());
        assert!(ProjectionSpec::new(3, 2, vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).is_err());
        assert!(ProjectionSpec::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).is_err());
        assert_eq!(ProjectionSpec::angle(PI + 0.5).theta(), Some(0.5));
    }
}
