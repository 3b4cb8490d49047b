use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    /// I/O failure, or `compare` found differences.
    pub const FAILURE: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const NOT_CONVERGED: i32 = 3;
    pub const INTERNAL: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at {field}: {message}")]
    Config { field: String, message: String },
    #[error("{path}: {message}")]
    Table { path: PathBuf, message: String },
    #[error("grids differ: {0}")]
    GridMismatch(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed artifact {path}: {message}")]
    Artifact { path: PathBuf, message: String },
    #[error(transparent)]
    Core(#[from] linfel_core::Error),
    #[error("invariant breached: {0}")]
    Invariant(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } | Self::Table { .. } | Self::GridMismatch(_) => exit::CONFIG,
            Self::Io { .. } | Self::Artifact { .. } => exit::FAILURE,
            Self::Core(_) | Self::Invariant(_) => exit::INTERNAL,
        }
    }
}
