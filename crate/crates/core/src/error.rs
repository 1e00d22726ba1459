//! Error type shared by every module in the crate.

use std::fmt;
use std::io;

/// All fallible operations in this crate return `Result<T, Error>`.
#[derive(Debug)]
pub enum Error {
    /// A caller passed an argument that violates an operation's contract.
    InvalidArgument(String),
    /// A configuration value (or combination of values) is unusable.
    Config(String),
    /// A data file could not be parsed. `line` is 1-based.
    Ingest {
        path: String,
        line: usize,
        msg: String,
    },
    /// A checkpoint file is malformed. `offset` is the byte position of the
    /// first inconsistency.
    Checkpoint { offset: u64, msg: String },
    /// A training loss evaluated to NaN or infinity.
    NonFiniteLoss { step: u64, detail: String },
    /// A gradient contained NaN or infinity; the optimizer step was aborted.
    NonFiniteGradient { step: u64, tensor: String },
    /// An internal invariant was violated; indicates a bug in this crate.
    Internal(String),
    /// An underlying I/O operation failed.
    Io { context: String, source: io::Error },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::Config(msg) => write!(f, "invalid config: {msg}"),
            Error::Ingest { path, line, msg } => {
                write!(f, "{path}:{line}: {msg}")
            }
            Error::Checkpoint { offset, msg } => {
                write!(f, "malformed checkpoint at byte {offset}: {msg}")
            }
            Error::NonFiniteLoss { step, detail } => {
                write!(f, "non-finite loss at step {step}: {detail}")
            }
            Error::NonFiniteGradient { step, tensor } => {
                write!(f, "non-finite gradient at step {step} in tensor '{tensor}'")
            }
            Error::Internal(msg) => write!(f, "internal error: {msg}"),
            Error::Io { context, source } => write!(f, "{context}: {source}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}

impl Error {
    /// Wrap an I/O error with a short description of what was being attempted.
    pub fn io(context: impl Into<String>, source: io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
