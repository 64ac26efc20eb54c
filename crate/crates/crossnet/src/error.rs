use std::io;
use std::path::{Path, PathBuf};

pub type Result<T> = std::result::Result<T, AppError>;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error(transparent)]
    Core(#[from] crossnet_core::Error),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },

    #[error("{0}")]
    Config(String),

    #[error("{0}")]
    Format(String),

    #[error("checkpoint checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    Checksum { stored: u32, computed: u32 },
}

/// Broad failure class, mapped one-to-one onto process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

impl ErrorKind {
    pub fn exit_code(self) -> u8 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numeric => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ErrorKind::Config => "config",
            ErrorKind::Data => "data",
            ErrorKind::Numeric => "numeric",
        }
    }
}

impl AppError {
    pub fn io(path: impl AsRef<Path>, source: io::Error) -> Self {
        AppError::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        use crossnet_core::Error as E;
        match self {
            AppError::Config(_) | AppError::Core(E::Config(_)) => ErrorKind::Config,
            AppError::Core(E::NonFinite(_)) => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }

    /// Single-line `error kind=<k> code=<n> message=<quoted>` report.
    pub fn report_line(&self) -> String {
        let kind = self.kind();
        format!(
            "error kind={} code={} message={:?}",
            kind.name(),
            kind.exit_code(),
            self.to_string()
        )
    }
}
