//! Error type shared by every module of the crate.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty payload")]
    EmptyPayload,

    #[error("compressor failure: {0}")]
    Compressor(#[source] std::io::Error),

    #[error("cannot read payload for example `{id}` at {path}: {source}")]
    UnreadablePayload {
        id: String,
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("duplicate example id `{0}`")]
    DuplicateId(String),

    #[error("manifest line {line}: {reason}")]
    Manifest { line: usize, reason: String },

    #[error("cannot split {examples} examples into {k} tasks")]
    InvalidTaskCount { k: usize, examples: usize },

    #[error("signal has zero power")]
    ZeroPowerSignal,

    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error("no arms available")]
    NoArmsAvailable,

    #[error("arm {arm} out of range for {k} arms")]
    InvalidArm { arm: usize, k: usize },

    #[error("reward {0} outside [-1, 1]")]
    RewardOutOfRange(f64),

    #[error("probability of played arm must be positive, got {0}")]
    NonPositiveProbability(f64),

    #[error("operation `{op}` not supported by the {kind} policy")]
    PolicyMismatch { op: &'static str, kind: &'static str },

    #[error("non-finite value: {0}")]
    NonFinite(f64),

    #[error("gain history is empty")]
    EmptyHistory,

    #[error("quantile level {0} outside [0, 1]")]
    InvalidQuantile(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("task {task} out of range for {k} tasks")]
    InvalidTask { task: usize, k: usize },

    #[error("learner protocol error after request {request}: {reason}")]
    Protocol { request: String, reason: String },

    #[error("learner process error: {0}")]
    LearnerProcess(String),

    #[error("trace error: {0}")]
    Trace(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }

    /// True for failures raised by a learner (synthetic or external).
    pub fn is_learner_failure(&self) -> bool {
        matches!(
            self,
            Error::Protocol { .. } | Error::LearnerProcess(_) | Error::InvalidTask { .. }
        )
    }
}
