use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input; `location` is a line number or a JSON path.
    #[error("{origin}:{location}: {message}")]
    Parse {
        origin: String,
        location: String,
        message: String,
    },

    /// Well-formed input whose ids do not resolve.
    #[error("{origin}: {location}: {message}")]
    Integrity {
        origin: String,
        location: String,
        message: String,
    },

    #[error("unmatched exit event at seq {seq} (line {line})")]
    UnmatchedExit { seq: u64, line: usize },

    #[error("unknown {kind} id '{id}'")]
    UnknownId { kind: &'static str, id: String },

    #[error("ground truth contains no concepts")]
    EmptyGroundTruth,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(origin: impl Into<String>, location: impl ToString, message: impl Into<String>) -> Self {
        Error::Parse {
            origin: origin.into(),
            location: location.to_string(),
            message: message.into(),
        }
    }

    pub(crate) fn integrity(
        origin: impl Into<String>,
        location: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Error::Integrity {
            origin: origin.into(),
            location: location.into(),
            message: message.into(),
        }
    }

    pub(crate) fn unknown(kind: &'static str, id: impl Into<String>) -> Self {
        Error::UnknownId { kind, id: id.into() }
    }
}
