use drn_core::{Error, FieldError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("invalid scenario")]
    Invalid(Vec<FieldError>),

    #[error("cannot read scenario {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },

    #[error("cannot parse scenario: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("run failed: {0}")]
    Runtime(Error),

    #[error("cannot write outputs: {0}")]
    Write(#[from] std::io::Error),

    #[error("cannot write csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// 2 for bad input, 3 for failures while running or writing.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_)
            | CliError::Invalid(_)
            | CliError::Read { .. }
            | CliError::Parse(_) => 2,
            CliError::Runtime(_) | CliError::Write(_) | CliError::Csv(_) => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidScenario(fields) => CliError::Invalid(fields),
            Error::Parse(p) => CliError::Parse(p),
            other => CliError::Runtime(other),
        }
    }
}
