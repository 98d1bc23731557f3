use thiserror::Error;

/// A command failure together with the process exit code it maps to.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config keys or values, or unusable input data: exit 2.
    #[error("{0}")]
    Usage(String),
    /// Anything else: exit 1.
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Internal(_) => 1,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }
}

impl From<lunar::Error> for CliError {
    fn from(e: lunar::Error) -> Self {
        use lunar::Error as E;
        match e {
            E::StaleCache => CliError::Internal(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

/// Output files that cannot be written are an environment failure, not a
/// usage error.
pub(crate) fn write_failed(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::Internal(format!("cannot write {}: {e}", path.display()))
}

pub type CliResult<T> = std::result::Result<T, CliError>;
