use thiserror::Error;

/// Errors raised by state construction, measurement and noise routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QstError {
    #[error("invalid dimension {0}: Hilbert-space cutoff must be at least 2")]
    InvalidDimension(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("degenerate Cholesky factor: tr(T†T) = {0:e}")]
    DegenerateFactor(f64),
    #[error("invalid observable: {0}")]
    InvalidObservable(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("Fock index {index} does not fit in cutoff {cutoff}")]
    OutOfSpace { index: usize, cutoff: usize },
    #[error("projection annihilates the state (norm {0:e})")]
    DegenerateProjection(f64),
    #[error("state has zero norm")]
    DegenerateState,
    #[error("cannot normalize data whose maximum is {0:e}")]
    DegenerateNormalization(f64),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("parameter `{field}` = {value} outside allowed range {range}")]
    OutOfRange {
        field: &'static str,
        value: f64,
        range: &'static str,
    },
}

pub type Result<T> = std::result::Result<T, QstError>;
