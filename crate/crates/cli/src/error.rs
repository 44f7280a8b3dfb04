use std::path::Path;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
            CliError::Output(_) => 1,
        }
    }

    pub fn output(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Output(format!("{}: {e}", path.display()))
    }
}

impl From<cna_core::Error> for CliError {
    fn from(e: cna_core::Error) -> Self {
        use cna_core::Error as E;
        let msg = e.to_string();
        match e {
            E::Shape(_) | E::Config(_) => CliError::Config(msg),
            E::Io { .. } | E::Format { .. } | E::EmptyDataset | E::LabelOutOfRange { .. } => CliError::Data(msg),
            E::NonFinite(_) | E::NoConvergence { .. } | E::UndefinedCorrelation(_) | E::Degenerate(_) => {
                CliError::Numeric(msg)
            }
        }
    }
}
