use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed or invalid input data; `line` is 1-based, header included.
    #[error("{}: {message}", location(path, *line))]
    Input {
        path: PathBuf,
        line: Option<u64>,
        message: String,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Estimation(lrcorr::Error),
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn location(path: &std::path::Path, line: Option<u64>) -> String {
    match line {
        Some(l) => format!("{}:{l}", path.display()),
        None => path.display().to_string(),
    }
}

impl CliError {
    pub fn input(path: impl Into<PathBuf>, line: Option<u64>, message: impl Into<String>) -> Self {
        CliError::Input {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input { .. } | CliError::Config(_) => exit::INVALID_INPUT,
            CliError::Estimation(e) => match e {
                lrcorr::Error::NoEvents(_)
                | lrcorr::Error::ZeroDenominator(_)
                | lrcorr::Error::ZeroVariance(_) => exit::DEGENERATE,
                _ => exit::INVALID_INPUT,
            },
            CliError::Output { .. } => exit::IO,
        }
    }
}

impl From<lrcorr::Error> for CliError {
    fn from(e: lrcorr::Error) -> Self {
        CliError::Estimation(e)
    }
}

pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const INVALID_INPUT: i32 = 2;
    pub const DEGENERATE: i32 = 3;
    pub const REPAIR_EXCEEDED: i32 = 4;
}
