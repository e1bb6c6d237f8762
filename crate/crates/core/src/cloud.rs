//! Weighted point clouds, the empirical stand-in for measures.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Finite weighted point set in `R^dim`; coordinates are stored flat.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
}

impl PointCloud {
    pub fn new(dim: usize, coords: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 || coords.len() != dim * weights.len() {
            return Err(Error::input(format!(
                "{} coordinates do not match {} weights in dimension {dim}",
                coords.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::input("weights must be finite and nonnegative"));
        }
        Ok(PointCloud { dim, coords, weights })
    }

    /// Equal weights `1/n`.
    pub fn uniform(dim: usize, coords: Vec<f64>) -> Result<Self> {
        let n = coords.len() / dim.max(1);
        Self::new(dim, coords, vec![1.0 / n.max(1) as f64; n])
    }

    pub fn empty(dim: usize) -> Self {
        PointCloud { dim, coords: Vec::new(), weights: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn points(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.coords.chunks_exact(self.dim).zip(self.weights.iter().copied())
    }

    pub fn push(&mut self, x: &[f64], w: f64) {
        debug_assert_eq!(x.len(), self.dim);
        self.coords.extend_from_slice(x);
        self.weights.push(w);
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Rescale weights to total mass one.
    pub fn normalize(&mut self) -> Result<()> {
        let t = self.total_weight();
        if !(t > 0.0) {
            return Err(Error::Degenerate("cloud has zero mass".into()));
        }
        self.weights.iter_mut().for_each(|w| *w /= t);
        Ok(())
    }

    /// Axis-aligned bounding box, `None` when empty.
    pub fn bbox(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        if self.is_empty() {
            return None;
        }
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for (p, _) in self.points() {
            for k in 0..self.dim {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        Some((lo, hi))
    }

    /// Bounding-box diagonal, an upper bound for the diameter.
    pub fn extent(&self) -> f64 {
        self.bbox().map_or(0.0, |(lo, hi)| {
            lo.iter().zip(&hi).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt()
        })
    }

    /// Keep the points satisfying `keep`.
    pub fn filter(&self, mut keep: impl FnMut(&[f64]) -> bool) -> PointCloud {
        let mut out = PointCloud::empty(self.dim);
        for (p, w) in self.points() {
            if keep(p) {
                out.push(p, w);
            }
        }
        out
    }

    /// Image under a pointwise map into `R^dim`.
    pub fn map(&self, dim: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> PointCloud {
        let mut coords = Vec::with_capacity(self.len() * dim);
        for (p, _) in self.points() {
            coords.extend(f(p));
        }
        PointCloud { dim, coords, weights: self.weights.clone() }
    }
}
