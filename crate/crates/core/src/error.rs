use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("output index {index} out of range for output arity {arity}")]
    IndexOutOfRange { index: usize, arity: usize },

    /// A disabled macro slot was looked up; selection masking upstream let it through.
    #[error("output index {index} refers to a disabled macro slot (selection masking bug)")]
    DisabledSlot { index: usize },

    #[error("invalid macro: {0}")]
    InvalidMacro(String),

    #[error("invalid action set: {0}")]
    InvalidActionSet(String),

    #[error("replay buffer under-filled: {size} entries, batch of {batch} requested")]
    UnderFilled { size: usize, batch: usize },

    #[error("episode is over; reset the environment before stepping")]
    EpisodeOver,

    #[error("action {action} is not valid for an environment with {count} actions")]
    InvalidAction { action: usize, count: usize },

    #[error("invalid environment: {0}")]
    InvalidEnvironment(String),

    #[error("no enabled outputs to choose from")]
    NoEnabledOutputs,

    #[error("{0}")]
    InvalidArgument(String),

    #[error("non-finite value during update: {0}")]
    NonFinite(String),

    #[error("value iteration did not converge within {sweeps} sweeps (last change {delta:e})")]
    NotConverged { sweeps: usize, delta: f64 },

    #[error("epoch grids differ between trials: {0}")]
    MismatchedGrid(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
