use std::path::PathBuf;

pub type Result<T, E = WorkbenchError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum WorkbenchError {
    /// Missing, malformed or inconsistent configuration or input files.
    #[error("{}: {message}", path.display())]
    Config { path: PathBuf, message: String },

    /// Inputs that are well-formed but unusable together.
    #[error("{0}")]
    Usage(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] ctap_core::Error),
}

impl WorkbenchError {
    pub fn config(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        WorkbenchError::Config { path: path.into(), message: message.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        WorkbenchError::Io { path: path.into(), source }
    }

    /// Process exit code: 1 for configuration or input problems, 2 for
    /// numerical failures and for outputs that cannot be written.
    pub fn exit_code(&self) -> i32 {
        match self {
            WorkbenchError::Config { .. } | WorkbenchError::Usage(_) => 1,
            WorkbenchError::Core(e) => match e {
                ctap_core::Error::InvalidArgument(_) | ctap_core::Error::DimensionMismatch { .. } => 1,
                _ => 2,
            },
            WorkbenchError::Io { .. } => 2,
        }
    }
}
