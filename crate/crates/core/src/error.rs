use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("protocol violation: segment {segment} received no upload")]
    MissingSegment { segment: usize },

    #[error("training diverged in round {round} on client {client} (loss {loss})")]
    DivergedTraining { round: u32, client: u32, loss: f64 },

    #[error("corrupt message: {reason} (tensor {tensor}, code {code_index})")]
    CorruptMessage {
        tensor: u16,
        code_index: usize,
        reason: &'static str,
    },

    #[error("corrupt message header: {0}")]
    CorruptHeader(String),

    #[error("message too large: {0}")]
    MessageTooLarge(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
