use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KwError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field does not live on this grid (expected {expected} nodes, got {actual})")]
    GridMismatch { expected: usize, actual: usize },

    #[error("right-hand side is incompatible with L: mean {mean:e} exceeds {tol:e}")]
    IncompatibleRhs { mean: f64, tol: f64 },

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("exponential argument {argument:.3} exceeds the overflow guard {limit}")]
    Overflow { argument: f64, limit: f64 },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("hypotheses not satisfied: {0}")]
    Hypothesis(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("monotone iteration increased by {increase:e} at iteration {iteration}")]
    MonotonicityViolation { iteration: usize, increase: f64 },

    #[error("sub/supersolution check failed: {0}")]
    BarrierCheck(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for KwError {
    fn from(e: std::io::Error) -> Self {
        KwError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, KwError>;
