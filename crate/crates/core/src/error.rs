use thiserror::Error;

/// Errors raised by the flow engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgrfError {
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("matrix is singular at t = {t}")]
    SingularAtTime { t: f64 },

    #[error("diagonal mode requires a diagonal covariance")]
    NotDiagonal,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, AgrfError>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(AgrfError::DimensionMismatch { expected, got })
    }
}
