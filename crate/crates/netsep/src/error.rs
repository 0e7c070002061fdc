use std::path::PathBuf;

/// Errors of the file, experiment and command layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0}")]
    Config(String),
    #[error("cannot read {path}: {source}")]
    Input {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Core(#[from] netsep_core::Error),
}

impl Error {
    /// Process exit code: 2 for bad input or configuration, 3 for failures
    /// while computing or writing.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_) | Error::Input { .. } | Error::Parse { .. } | Error::Format(_) => 2,
            Error::Output { .. } | Error::Core(_) => 3,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
