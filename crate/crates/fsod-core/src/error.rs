//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("channel count mismatch: {left} vs {right}")]
    ChannelMismatch { left: usize, right: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("unknown dataset '{0}' (no canonical split)")]
    UnknownDataset(String),

    #[error("unknown preset '{0}'")]
    UnknownPreset(String),

    #[error("unknown category id {0}")]
    UnknownCategory(u32),

    #[error("insufficient data for category {category}: need {needed}, have {available}")]
    InsufficientData {
        category: u32,
        needed: usize,
        available: usize,
    },

    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("malformed JSON in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::ShapeMismatch(msg.into())
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
