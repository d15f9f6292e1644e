use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("parse error in {source_name} at {location}: {message}")]
    Parse {
        source_name: String,
        location: String,
        message: String,
    },

    #[error("missing artifact for stage `{stage}`: {detail}")]
    MissingArtifact { stage: &'static str, detail: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(
        source_name: impl Into<String>,
        location: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Error::Parse {
            source_name: source_name.into(),
            location: location.into(),
            message: message.into(),
        }
    }
}
