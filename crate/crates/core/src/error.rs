use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimbaError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("numerical consistency check failed: {0}")]
    NumericalConsistency(String),
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("unknown optimizer `{0}`")]
    UnknownOptimizer(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SimbaError>;

pub(crate) fn invalid_input(msg: impl Into<String>) -> SimbaError {
    SimbaError::InvalidInput(msg.into())
}

pub(crate) fn invalid_param(msg: impl Into<String>) -> SimbaError {
    SimbaError::InvalidParameter(msg.into())
}
