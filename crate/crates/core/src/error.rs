use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("coordinate out of range: {0}")]
    OutOfRange(String),
    #[error("semi-infinite element {0} has no finite map")]
    SemiInfinite(usize),
    #[error("unknown problem '{0}'")]
    UnknownProblem(String),
    #[error("missing data: {0}")]
    MissingData(String),
    #[error("problem too large for dense assembly: {dof} unknowns (limit {limit})")]
    TooLarge { dof: usize, limit: usize },
    #[error("solver breakdown at iteration {iteration}: {reason}")]
    Breakdown { iteration: usize, reason: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
