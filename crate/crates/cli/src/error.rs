use std::fmt::Display;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Failures surfaced by the command-line tool. Numerical failures exit with
/// status 1, everything else (configuration, files, malformed input) with 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: line {line}: {message}", path.display())]
    Ingest { path: PathBuf, line: u64, message: String },
    #[error("{context}: {message}")]
    Numerical { context: String, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Numerical { .. } => 1,
            _ => 2,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn numerical(context: impl Into<String>, err: impl Display) -> Self {
        Self::Numerical {
            context: context.into(),
            message: err.to_string(),
        }
    }

    /// Prefixes the context of a numerical failure; other variants pass through.
    pub fn within(self, outer: &str) -> Self {
        match self {
            Self::Numerical { context, message } => Self::Numerical {
                context: format!("{outer}: {context}"),
                message,
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
