use std::io;
use std::path::{Path, PathBuf};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] scorelabel_core::Error),

    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: io::Error },

    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: io::Error },

    /// Malformed input file.
    #[error("{}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },

    /// Bad flag or config value caught before any stage runs.
    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub fn read(path: &Path, source: io::Error) -> Self {
        Error::Read { path: path.to_path_buf(), source }
    }

    pub fn write(path: &Path, source: io::Error) -> Self {
        Error::Write { path: path.to_path_buf(), source }
    }

    pub fn format(path: &Path, msg: impl Into<String>) -> Self {
        Error::Format { path: path.to_path_buf(), msg: msg.into() }
    }

    /// Process exit code: 2 for invalid input, 3 for runtime or numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Core(e) if !e.is_validation() => 3,
            Error::Write { .. } => 3,
            _ => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Core(scorelabel_core::Error::Integration { .. }) => "integration",
            Error::Core(scorelabel_core::Error::Training { .. }) => "training",
            Error::Core(scorelabel_core::Error::Preprocess(_)) => "preprocess",
            Error::Core(scorelabel_core::Error::Shape(_)) => "shape",
            Error::Core(scorelabel_core::Error::Comparison(_)) => "comparison",
            Error::Core(scorelabel_core::Error::Config(_)) | Error::Usage(_) => "config",
            Error::Read { .. } => "read",
            Error::Write { .. } => "write",
            Error::Format { .. } => "format",
        }
    }

    /// `error[kind]: message` on one line.
    pub fn one_line(&self) -> String {
        let msg = self.to_string().replace(['\n', '\r'], " ");
        format!("error[{}]: {}", self.kind(), msg)
    }
}
