use std::io;
use std::path::{Path, PathBuf};

use serde_json::json;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },

    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: PathBuf, line: u64, column: usize, message: String },

    #[error("{path}: invalid JSON: {source}")]
    Json { path: PathBuf, source: serde_json::Error },

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error(transparent)]
    Core(#[from] jury_core::Error),
}

impl Error {
    pub fn io(path: &Path, source: io::Error) -> Self {
        Error::Io { path: path.to_path_buf(), source }
    }

    pub fn parse(path: &Path, line: u64, column: usize, message: impl Into<String>) -> Self {
        Error::Parse { path: path.to_path_buf(), line, column, message: message.into() }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Error::Invalid(message.into())
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::Json { .. } => "json",
            Error::Invalid(_) | Error::Core(jury_core::Error::InvalidArgument(_)) => "invalid_argument",
            Error::Core(_) => "computation",
        }
    }

    /// One-line machine-readable form written to stderr on failure.
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({ "error": self.kind(), "message": self.to_string() });
        match self {
            Error::Io { path, .. } | Error::Json { path, .. } => {
                v["path"] = json!(path.display().to_string());
            }
            Error::Parse { path, line, column, .. } => {
                v["path"] = json!(path.display().to_string());
                v["line"] = json!(line);
                v["column"] = json!(column);
            }
            _ => {}
        }
        v
    }
}
