use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("configuration violates a convergence hypothesis: {0}")]
    ConfigViolation(String),

    #[error("malformed graph: {0}")]
    MalformedGraph(String),

    #[error("unsupported problem: {0}")]
    UnsupportedProblem(String),

    #[error("query at t={t} outside [{lo}, {hi}]")]
    QueryOutOfRange { t: f64, lo: f64, hi: f64 },

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}
