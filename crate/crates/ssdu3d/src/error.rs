use std::io;
use std::path::{Path, PathBuf};

/// Errors from file formats, configuration and the command-line tool.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Core(#[from] ssdu3d_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: &Path, source: io::Error) -> Self {
        Error::Io { path: path.to_path_buf(), source }
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    /// Process exit status: 2 usage, 3 IO or format, 4 numeric failure, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use ssdu3d_core::Error as C;
        match self {
            Error::Usage(_) => 2,
            Error::Io { .. } | Error::Format(_) => 3,
            Error::Core(C::Numeric(_) | C::Divergence(_)) => 4,
            Error::Core(_) => 1,
        }
    }

    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        use ssdu3d_core::Error as C;
        match self {
            Error::Usage(_) => "usage",
            Error::Io { .. } => "io",
            Error::Format(_) => "format",
            Error::Core(C::Numeric(_)) => "numeric",
            Error::Core(C::Divergence(_)) => "divergence",
            Error::Core(C::Sizing(_)) => "sizing",
            Error::Core(C::Infeasible(_)) => "infeasible",
            Error::Core(C::DegenerateReference(_)) => "degenerate_reference",
            Error::Core(C::Argument(_)) => "argument",
        }
    }
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
