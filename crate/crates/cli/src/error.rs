use std::path::Path;

use lbsplit::catastrophic::CatastrophicError;
use lbsplit::tally::TallyError;
use lbsplit::SolveError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.display().to_string(), source }
    }

    /// Process exit status: 2 config or usage, 3 I/O, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Usage(_) => 2,
            Self::Io { .. } => 3,
            Self::Numerical(_) => 4,
        }
    }

    pub fn from_catastrophic(e: CatastrophicError) -> Self {
        match e {
            CatastrophicError::Io { path, source } => Self::Io { path, source },
            other => Self::Config(other.to_string()),
        }
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::NonFinite { .. } | SolveError::Energy { .. } | SolveError::Pool(_) => {
                Self::Numerical(e.to_string())
            }
            SolveError::Catastrophic(c) => Self::from_catastrophic(c),
            other => Self::Config(other.to_string()),
        }
    }
}

impl From<TallyError> for CliError {
    fn from(e: TallyError) -> Self {
        match e {
            TallyError::Io { path, source } => Self::Io { path, source },
            other => Self::Numerical(other.to_string()),
        }
    }
}
