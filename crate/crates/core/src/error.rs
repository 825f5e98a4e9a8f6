use thiserror::Error;

/// Errors produced by the estimation library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A Cholesky pivot fell at or below the tolerance. `column` is 1-based.
    #[error("matrix is not positive definite: pivot {pivot:e} at column {column}")]
    NotPositiveDefinite { column: usize, pivot: f64 },

    #[error("eigen solver did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: String, actual: String },

    /// `k` must satisfy `k < limit = min(n - 1, p)`.
    #[error("invalid band k = {k}: must be below min(n - 1, p) = {limit}")]
    InvalidBand { k: usize, limit: usize },

    /// A sequential regression left (numerically) nothing of its response.
    /// `column` is 1-based.
    #[error("degenerate residual at column {column}: data are collinear")]
    DegenerateResidual { column: usize },

    #[error("data matrix is not centered")]
    NotCentered,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("penalized solver did not converge after {iterations} iterations")]
    SolverNoConvergence { iterations: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("covariance estimate could not be inverted: {0}")]
    SingularCovariance(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
