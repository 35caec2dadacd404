//! Command-line front end for `lagmesh`: configuration, run orchestration
//! and file output.

pub mod config;
pub mod output;

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] lagmesh::Error),

    #[error("bad value for '{key}': {message}")]
    BadValue { key: String, message: String },

    #[error("config file {path}: {message}")]
    ConfigFile { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::BadValue { .. } => "bad_value",
            CliError::ConfigFile { .. } => "config_file",
            CliError::Io { .. } => "io",
            CliError::Json(_) => "json",
            CliError::Usage(_) => "usage",
        }
    }

    /// One-line JSON error record.
    pub fn record(&self) -> String {
        let message = self.to_string().replace('\n', " ");
        serde_json::json!({ "error": self.kind(), "message": message.trim() }).to_string()
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
