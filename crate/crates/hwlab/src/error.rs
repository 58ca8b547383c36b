use thiserror::Error;

/// Crate-wide error type.
///
/// Variants are grouped by what the caller can do about them: bad inputs
/// (`DimensionMismatch`, `NotSymmetric`, `InvalidParams`, `InvalidConfig`,
/// `Parse`, `InsufficientSamples`, `EmptyWitnessSet`), numerical failures
/// (`NonConvergence`, `BisectionFailure`, `DegenerateCovariance`), and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not symmetric: {0}")]
    NotSymmetric(String),

    #[error("iteration did not converge: {0}")]
    NonConvergence(String),

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("insufficient samples: need at least {need}, got {got}")]
    InsufficientSamples { need: usize, got: usize },

    #[error("witness set is empty")]
    EmptyWitnessSet,

    #[error("bisection failed: {0}")]
    BisectionFailure(String),

    #[error("degenerate covariance: operator norm is zero")]
    DegenerateCovariance,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
