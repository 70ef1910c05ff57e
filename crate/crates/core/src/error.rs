use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("placement infeasible: placed {placed} of {requested} nodes within the attempt budget")]
    PlacementInfeasible { placed: usize, requested: usize },

    #[error("slot {slot} out of range 1..={horizon}")]
    SlotOutOfRange { slot: usize, horizon: usize },

    #[error("link ({from}->{to}) has zero rate in slot {slot}")]
    ZeroRateLink { from: usize, to: usize, slot: usize },

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("workload error: {0}")]
    Workload(String),

    #[error("environment error: {0}")]
    Env(String),

    #[error("malformed schedule log: {0}")]
    MalformedLog(String),

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("instance too large for exact search: {0}")]
    InstanceTooLarge(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { key: key.into(), message: message.into() }
    }
}
