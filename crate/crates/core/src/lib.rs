//! Estimation and simultaneous inference for high-dimensional multi-response
//! linear growth curve models with a separable (spatial ⊗ temporal) error
//! covariance.
//!
//! The crate is `no_std` (it needs `alloc`). Enable `parallel` to fit regions
//! and Monte-Carlo replications on a rayon pool.
//!
//! Pipeline:
//!
//! 1. [`estimation::estimate_all`] decomposes the error law into the spatial,
//!    temporal and random-effect pieces ([`CovarianceComponents`]).
//! 2. [`gls::gls_fit`] solves the per-region generalized least-squares problems
//!    block by block.
//! 3. [`inference::global_test`] and [`inference::multiple_test`] run the
//!    max-statistic test and the FDR-controlled multiple test.
#![no_std]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod error;
pub mod estimation;
pub mod gls;
pub mod inference;
pub mod linalg;
pub mod model;
mod par;
pub mod simulation;
pub mod study;

pub use error::{Error, Result};
pub use estimation::{estimate_all, CovarianceEstimate, EstimationDiagnostics, EstimatorOptions};
pub use gls::{gls_fit, FitResult, PreparedGls};
pub use inference::{global_test, multiple_test, GlobalTestReport, MultipleTestReport};
pub use model::{
    CoefficientMatrix, CovarianceComponents, DesignMatrix, GrowthBasis, GrowthCurveDataset,
    RegionCovariance,
};
