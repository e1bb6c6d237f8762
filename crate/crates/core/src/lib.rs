//! Symbolic iterated function systems, Gibbs measures on subshifts of finite
//! type, b-adic scenery of the resulting fractal measures, extraction of
//! strongly separated full-shift subsystems, and desk-scale experiments on
//! projections and distance sets.

pub mod cli;
pub mod cloud;
mod dyadic;
pub mod error;
pub mod geometry;
pub mod gibbs;
pub mod ifs;
pub mod output;
pub mod region;
pub mod scenery;
pub mod subsystem;
pub mod symbolic;

pub use cloud::PointCloud;
pub use error::{Error, Result};
