//! d-dimensional two-sample Kolmogorov–Smirnov testing.
//!
//! The crate computes the exact ddKS statistic, two faster approximations
//! (vdKS on a voxel grid, rdKS on radial distances), an analytic
//! significance estimate and permutation p-values, plus a handful of
//! baseline tests and a power-analysis harness.

pub mod baselines;
pub mod cli;
pub mod datasets;

mod ecdf;
pub mod error;
pub mod exact;
pub mod harness;
pub mod method;
pub mod rdks;
pub mod rng;
pub mod significance;
pub mod types;
pub mod vdks;

pub use error::{Error, Result};
pub use exact::{ddks_statistic, ddks_statistic_naive, ExactConfig};
pub use method::{evaluate, run_test, MethodStatistic, PValueMode};
pub use rdks::rdks_statistic;
pub use rng::RngSpec;
pub use significance::{ddks_significance, permutation_test};
pub use types::{Method, Sample, TestOutcome};
pub use vdks::{vdks_statistic, VdksConfig};
