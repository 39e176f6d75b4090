use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("operator is not Hermitian (deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },
    #[error("operator is singular or ill-conditioned (condition estimate {condition:.3e})")]
    Singular { condition: f64 },
    #[error("coefficient a_{index} is singular (condition estimate {condition:.3e})")]
    SingularCoefficient { index: usize, condition: f64 },
    #[error("coefficient at index {index} is not finite")]
    NonFiniteCoefficient { index: usize },
    #[error("index {index} is outside the tabulated range (length {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("sequence did not converge: {what} (residual {residual:.3e})")]
    NotConvergent { what: String, residual: f64 },
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}
