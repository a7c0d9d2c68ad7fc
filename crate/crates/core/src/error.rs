//! Error type shared by the simulator, optimizer and parsers.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The request would exceed a configured resource guard
    /// (state-vector size cap, enumeration budget cap).
    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    /// Sequence or document text could not be parsed. `position` is a byte
    /// offset into the input.
    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },

    /// A collapse was requested onto a measurement outcome of probability zero.
    #[error("cannot collapse onto zero-probability prefix {prefix}")]
    ZeroProbabilityPrefix { prefix: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn parse(position: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            position,
            message: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
