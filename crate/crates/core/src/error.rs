//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown search space preset `{0}`")]
    UnknownPreset(String),

    #[error("invalid search space: {0}")]
    InvalidSpace(String),

    #[error("genome has {actual} tokens, schema for `{space}` expects {expected}")]
    GenomeLength {
        space: String,
        expected: usize,
        actual: usize,
    },

    #[error("token {index} ({slot}) out of range: {token} >= {choices}")]
    TokenOutOfRange {
        index: usize,
        slot: String,
        token: u32,
        choices: u64,
    },

    #[error("invalid cell: {0}")]
    InvalidCell(String),

    #[error("resolution ratio {from}:{to} is not a power of two")]
    UnsupportedScale { from: u32, to: u32 },

    #[error("image size {image} is not divisible by 2^{level}")]
    ImageSize { image: u32, level: u8 },

    #[error("graph consistency violation: {0}")]
    GraphConsistency(String),

    #[error("unsupported operator: {0}")]
    UnsupportedOp(String),

    #[error("latency table has no entry for `{0}`")]
    LutMiss(String),

    #[error("latency must be positive, got {0}")]
    NonPositiveLatency(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error in {source_name}, line {line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(source_name: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.into(),
            line,
            message: message.into(),
        }
    }
}
