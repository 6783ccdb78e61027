use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::format::FormatError;

/// Process exit statuses.
pub mod exit {
    pub const SUCCESS: u8 = 0;
    pub const IO: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const FORMAT: u8 = 3;
    pub const VALIDATION: u8 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Format {
        path: PathBuf,
        #[source]
        source: FormatError,
    },
    #[error(transparent)]
    Validation(#[from] tabsketch::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("writing output: {0}")]
    Output(#[source] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Format { .. } => exit::FORMAT,
            CliError::Validation(_) => exit::VALIDATION,
            CliError::Io { .. } | CliError::Output(_) => exit::IO,
        }
    }

    /// Attaches `path` to a file-reading failure. Plain I/O failures stay
    /// I/O errors; anything about the bytes themselves is a format error.
    pub(crate) fn reading(path: impl Into<PathBuf>, source: FormatError) -> Self {
        let path = path.into();
        match source {
            FormatError::Io(source) => CliError::Io { path, source },
            source => CliError::Format { path, source },
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(e.into())
    }
}
