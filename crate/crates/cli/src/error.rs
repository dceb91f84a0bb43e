use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("cannot read {file}: {source}")]
    Read {
        file: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {file}: {source}")]
    Write {
        file: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("numerical failure: {0}")]
    Numerical(#[from] twophoton_core::Error),
}

impl CliError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// 2 for anything the user can fix in the input, 3 for numerical aborts.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config { .. } | Self::Read { .. } => 2,
            Self::Numerical(twophoton_core::Error::InvalidRate { .. })
            | Self::Numerical(twophoton_core::Error::InvalidPulse(_))
            | Self::Numerical(twophoton_core::Error::InvalidGrid(_))
            | Self::Numerical(twophoton_core::Error::Parse(_)) => 2,
            Self::Numerical(_) | Self::Write { .. } => 3,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
