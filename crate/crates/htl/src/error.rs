use std::path::{Path, PathBuf};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] htl_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}:{line}: {message}", path.display())]
    Format { path: PathBuf, line: usize, message: String },
    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{0}")]
    Usage(String),
}

impl Error {
    /// Short machine-readable category.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Core(e) => e.class(),
            Error::Io { .. } => "io",
            Error::Format { .. } | Error::Json { .. } => "format",
            Error::Usage(_) => "usage",
        }
    }

    pub(crate) fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
        move |source| Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn format(path: &Path, line: usize, message: impl Into<String>) -> Error {
        Error::Format {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }
}
