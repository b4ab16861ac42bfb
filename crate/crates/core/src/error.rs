use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("index {0} is already a member of the set")]
    IndexInSet(usize),

    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("malformed CSR structure: {0}")]
    MalformedCsr(String),

    #[error("invalid spectrum bounds: {0}")]
    InvalidBounds(String),

    #[error("zero vector has no quadrature")]
    ZeroVector,

    /// A pivot of the Jacobi matrix (or a dense factorization) went non-positive.
    #[error("matrix is not positive definite along the Krylov space (pivot {pivot:e} at iteration {iter})")]
    NotPositiveDefinite { iter: usize, pivot: f64 },

    #[error("Schur complement {value:e} is not positive")]
    NonPositiveSchur { value: f64 },

    #[error("non-positive diagonal entry {value:e} at row {row}")]
    NonPositiveDiagonal { row: usize, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension {dim} exceeds the limit {limit}")]
    TooLarge { dim: usize, limit: usize },

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// True for failures that come from the numerics (breakdown, non-PD input)
    /// rather than from malformed arguments or I/O.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. } | Error::NonPositiveSchur { .. } | Error::NonPositiveDiagonal { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
