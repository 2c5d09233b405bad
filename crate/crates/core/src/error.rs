use thiserror::Error;

/// Errors raised by estimators, the simulation harness and the I/O layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty sample")]
    EmptySample,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("rule undefined at y = {0}")]
    RuleUndefined(u64),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("infinite KL loss: true mean is 0 at index {0} but the estimate is not")]
    InfiniteKlLoss(usize),

    #[error("underflow at y = {0}; raise y_max cap or use log-space")]
    Underflow(u64),

    #[error("prior incompatible with data: marginal probability of y = {0} is zero")]
    IncompatiblePrior(u64),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
