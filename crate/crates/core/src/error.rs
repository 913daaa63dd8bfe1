use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("malformed event file at byte {offset}: {reason}")]
    MalformedHeader { offset: u64, reason: String },

    #[error("truncated event record at byte {offset}")]
    TruncatedRecord { offset: u64 },

    #[error("event at byte {offset} out of bounds: ({x}, {y}) not inside {width}x{height}")]
    OutOfBounds {
        offset: u64,
        x: u16,
        y: u16,
        width: u16,
        height: u16,
    },

    #[error("invalid polarity {polarity} at byte {offset}")]
    InvalidPolarity { offset: u64, polarity: i8 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("divergence at step {step}: {what}")]
    Divergence { step: usize, what: String },

    #[error("solver did not converge within {iterations} iterations")]
    NotConverged { iterations: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}
