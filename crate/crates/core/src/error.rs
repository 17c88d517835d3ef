use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {field}: {message}")]
    InvalidSpec { field: &'static str, message: String },

    #[error("{what} index {index} out of range (valid {lo}..={hi})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        lo: usize,
        hi: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("operation requires a quadratic potential (gamma = 2), got gamma = {0}")]
    NotQuadratic(f64),

    #[error("operation requires the {0} boundary condition")]
    WrongBoundary(&'static str),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("invalid circulant operator: eigenvalue {value:e} at Fourier mode {mode}")]
    InvalidOperator { mode: usize, value: f64 },

    #[error("size {size} exceeds the dense solver cap of {cap}")]
    TooLarge { size: usize, cap: usize },

    #[error("quadrature did not converge: partial value {value}, error estimate {error:e}")]
    QuadratureNotConverged { value: f64, error: f64 },

    #[error("integral does not converge: {0}")]
    NonIntegrable(String),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("series too short: length {len}, need at least {min}")]
    SeriesTooShort { len: usize, min: usize },

    #[error("only {got} batches after burn-in, need at least {min}")]
    InsufficientBatches { got: usize, min: usize },

    #[error("too few scaling points: {got}, need at least {min}")]
    TooFewPoints { got: usize, min: usize },

    #[error("config error{}: {message}", if *line > 0 { format!(" at line {line}") } else { String::new() })]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Broad failure class, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Numeric,
}

impl Error {
    pub fn invalid(field: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidSpec {
            field,
            message: message.into(),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidSpec { .. }
            | Error::Config { .. }
            | Error::OutOfRange(_)
            | Error::WrongBoundary(_)
            | Error::NotQuadratic(_)
            | Error::TooLarge { .. }
            | Error::DimensionMismatch(_)
            | Error::IndexOutOfRange { .. } => ErrorClass::Config,
            _ => ErrorClass::Numeric,
        }
    }
}
