use thiserror::Error;

/// Errors raised by the planning and simulation layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no path: cell {0} was not reached by the wavefront")]
    NoPath(usize),

    #[error("brute force refused: {goals} goals exceeds the cap of {cap}")]
    TooManyGoals { goals: usize, cap: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
