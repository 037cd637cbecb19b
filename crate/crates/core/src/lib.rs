//! Chain metrics, iterated function systems, and numerical non-attractor
//! certificates for two pathological continua: the "infinite needle" obtained
//! by bending a flattened continuum along the graph of `sqrt(x) sin(1/x)`, and
//! the zigzag fan `P` whose `n`-th arm has length `2^n`.
//!
//! Sets are represented by point clouds with an explicit sampling pitch, and
//! every numeric verdict carries the resolution it was obtained at.

pub mod certify;
pub mod cli;
pub mod continua;
pub mod error;
pub mod format;
pub mod geometry;
pub mod ifs;
pub mod metric;
mod spatial;
pub mod svg;

pub use error::{Error, Result};
pub use geometry::{Continuum, ContinuumModel, Point, PointCloud, Polyline};
