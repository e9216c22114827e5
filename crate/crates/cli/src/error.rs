use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config {file}: at `{path}`: {message}")]
    ConfigInvalid { file: PathBuf, path: String, message: String },
    #[error("{0}")]
    Math(String),
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(file: &Path, path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::ConfigInvalid { file: file.to_path_buf(), path: path.into(), message: message.into() }
    }

    pub fn math(e: impl std::fmt::Display) -> Self {
        Self::Math(e.to_string())
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::ConfigInvalid { .. } => 2,
            Self::Math(_) => 3,
            Self::Io { .. } => 4,
        }
    }
}
