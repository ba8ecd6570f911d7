use std::path::{Path, PathBuf};

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// Exit status for malformed or missing input.
pub const EXIT_INPUT: i32 = 2;
/// Exit status for numerical failures such as a diverging loss.
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] crowdprior_core::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_owned(),
            source,
        }
    }

    pub fn parse(path: &Path, line: usize, message: impl ToString) -> Self {
        Self::Parse {
            path: path.to_owned(),
            line,
            message: message.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        use crowdprior_core::Error as E;
        match self {
            Self::Core(E::NonFinite(_) | E::NanLoss { .. }) => EXIT_NUMERIC,
            _ => EXIT_INPUT,
        }
    }
}
