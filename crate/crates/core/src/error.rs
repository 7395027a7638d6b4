use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("integration diverged on body {body} at t = {time} s")]
    Diverged { body: usize, time: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("width mismatch: expected {expected}, got {actual}")]
    WidthMismatch { expected: usize, actual: usize },

    #[error("variant mismatch: expected {expected}, got {actual}")]
    VariantMismatch { expected: String, actual: String },

    #[error("unsupported {kind} format version {found} (reader supports {supported})")]
    SchemaVersion {
        kind: String,
        found: u32,
        supported: u32,
    },

    #[error("malformed {kind} file: {reason}")]
    Malformed { kind: String, reason: String },

    #[error("scenario out of bounds: {0}")]
    Scenario(String),

    #[error("training aborted: {0}")]
    Training(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// Process exit status for the command-line front end. Usage errors
    /// exit with 2.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Toml(_) => 3,
            Error::Io { .. } => 4,
            Error::SchemaVersion { .. } => 5,
            Error::Malformed { .. } | Error::Json(_) => 6,
            Error::WidthMismatch { .. } => 7,
            Error::VariantMismatch { .. } => 8,
            Error::Scenario(_) => 9,
            Error::Training(_) => 10,
            Error::Diverged { .. } => 11,
            Error::InvalidInput(_) => 12,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
