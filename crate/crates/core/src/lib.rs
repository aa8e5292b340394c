//! Mass transference for systems of linear forms.
//!
//! The crate is organised bottom-up:
//!
//! * [`dimfun`]: dimension functions `f(r) = c r^s (ln 1/r)^a`, approximating
//!   functions, the transfer transforms and series classification.
//! * [`geometry`]: balls, affine and resonant planes, the block norm, the
//!   greedy 5r-cover and separated packings.
//! * [`diophantine`]: primitivity filters, the scene constant `M`, pair
//!   enumeration and witness search.
//! * [`estimator`]: dimension prediction, Monte Carlo measure, box counting,
//!   greedy Hausdorff upper bounds and mass-distribution checks.
//! * [`engine`]: the covering collections, packings and the Cantor tree with
//!   its measure, plus verification of the ball-measure bound.
//! * [`cli`]: config files, reports and the `mtp` command.
//!
//! The `examples/` directory has one runnable program per capability.

pub mod cli;
pub mod dimfun;
pub mod diophantine;
pub mod engine;
pub mod error;
pub mod estimator;
pub mod geometry;
pub mod raster;

pub use error::{Error, Result};
