use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("vector has zero norm")]
    ZeroVector,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("need at least {needed} vectors, found {found}")]
    TooFewVectors { needed: usize, found: usize },

    #[error("variance must be positive and finite, got {0}")]
    InvalidVariance(f64),

    #[error("vector is not unit norm (norm = {norm})")]
    NotUnitNorm { norm: f64 },

    #[error("input contains non-finite values")]
    NonFinite,

    #[error("SVD did not converge after {sweeps} sweeps")]
    ConvergenceFailure { sweeps: usize },

    #[error("half angle {0} is outside [0, pi/2]")]
    AngleOutOfRange(f64),

    #[error("dimension {0} is too small (need at least 2)")]
    DimTooSmall(usize),

    #[error("invalid MLP spec: {0}")]
    InvalidSpec(String),

    #[error("cosine target {0} must lie strictly inside (-1, 1)")]
    InvalidCos(f64),

    #[error("precondition violated: cos {cos} is not below the bound {bound}")]
    PreconditionViolated { cos: f64, bound: f64 },

    #[error("sigma must be positive and finite, got {0}")]
    InvalidSigma(f64),

    #[error("batch is empty")]
    EmptyBatch,

    #[error("temperature must be positive and finite, got {0}")]
    InvalidTemperature(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("training diverged at step {step} (loss is not finite)")]
    DivergenceDetected { step: usize },

    #[error("file not found: {}", .0.display())]
    NotFound(PathBuf),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("row {row} has dimension {found}, expected {expected}")]
    RowDimensionMismatch {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }
}
