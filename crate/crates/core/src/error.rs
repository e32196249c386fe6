use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the statistics, generators and harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("DimensionMismatch: expected d={expected}, found d={found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("EmptySample: a sample must contain at least one point")]
    EmptySample,

    #[error("NonFiniteValue: entry at row {row}, column {col} is not finite")]
    NonFiniteValue { row: usize, col: usize },

    #[error("DimensionTooLarge: d={d} exceeds the configured maximum of {max}")]
    DimensionTooLarge { d: usize, max: usize },

    #[error("OutOfRange: coordinate {value} lies outside [0, 1]")]
    OutOfRange { value: f64 },

    #[error("GridTooLarge: {cells} cells exceed the limit of {limit}")]
    GridTooLarge { cells: u128, limit: u128 },

    #[error("EmptyList: both lists must be nonempty")]
    EmptyList,

    #[error("DomainError: {0}")]
    Domain(String),

    #[error("SingularCovariance: pooled covariance is not positive definite")]
    SingularCovariance,

    #[error("InsufficientSamples: {0}")]
    InsufficientSamples(String),

    #[error("BadSpec: {0}")]
    BadSpec(String),

    #[error("IoError: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("ParseError: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
