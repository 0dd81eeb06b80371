//! Kernel inverse regression for spatially dependent lattice data.
//!
//! The crate estimates the effective dimension-reduction (EDR) space of a
//! regression `m(x) = g(Phi x)` from the covariance of a kernel estimate of
//! the inverse regression `E(X | Y)`, chooses how many lattice neighbors carry
//! information for spatial prediction, and builds the dimension-reduction
//! spatial predictor on top of both.
//!
//! Modules, bottom-up:
//!
//! * [`lattice`]: sites, rectangular regions, neighbor ordering and the
//!   associated regression process.
//! * [`fieldsim`]: seeded m-dependent random fields and single-index data.
//! * [`kernelest`]: kernels, bandwidth schedules and kernel estimators.
//! * [`edr`]: covariance estimators, the generalized eigenproblem and
//!   subspace distances.
//! * [`predictor`]: neighbor-count scan, reduced and baseline predictors.
//! * [`bench`]: Monte Carlo experiments and their reports.

pub mod bench;
pub mod config;
pub mod edr;
pub mod error;
pub mod fieldsim;
pub mod io;
pub mod kernelest;
pub mod lattice;
pub mod predictor;
pub mod rng;

pub use error::{Error, Result};
