use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("capacity exceeded: {0}")]
    CapacityExceeded(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("accumulator overflow: {0}")]
    AccumulatorOverflow(String),

    #[error("truncation error: {0}")]
    TruncationError(String),

    #[error("zero-probability event: {0}")]
    ZeroProbabilityEvent(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
