use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{failed} of {total} checks failed")]
    ChecksFailed { failed: usize, total: usize },

    #[error("{}: {source}", path.display())]
    File { path: std::path::PathBuf, source: std::io::Error },

    #[error(transparent)]
    Core(#[from] disi::Error),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl CliError {
    /// 1 check or run failure, 2 usage or configuration, 3 I/O.
    pub fn exit_code(&self) -> u8 {
        use disi::Error as E;
        match self {
            CliError::ChecksFailed { .. } => 1,
            CliError::Usage(_) => 2,
            CliError::File { .. } => 3,
            CliError::Core(E::Io(_)) => 3,
            CliError::Core(E::Csv(c)) if c.is_io_error() => 3,
            CliError::Core(E::NonFiniteLoss { .. }) => 1,
            CliError::Core(_) => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

/// Attaches `path` to I/O failures of `r`.
pub fn at<T>(path: &std::path::Path, r: disi::Result<T>) -> CliResult<T> {
    r.map_err(|e| match e {
        disi::Error::Io(source) => CliError::File { path: path.to_path_buf(), source },
        disi::Error::Csv(c) if c.is_io_error() => CliError::File { path: path.to_path_buf(), source: c.into() },
        e => CliError::Core(e),
    })
}
