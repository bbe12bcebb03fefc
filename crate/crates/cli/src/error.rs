use std::path::PathBuf;

use storeplace::demand::DemandError;
use storeplace::eval::EvalError;
use storeplace::ingest::IngestError;
use storeplace::learners::LearnError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config {path}: {msg}")]
    Config { path: PathBuf, msg: String },
    #[error("{0}")]
    Data(String),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config { .. } => 2,
            CliError::Data(_) | CliError::Write { .. } => 3,
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::InvalidConfig(_) | IngestError::EmptySalt => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<DemandError> for CliError {
    fn from(e: DemandError) -> Self {
        match e {
            DemandError::InvalidParam { .. } | DemandError::CellTooSmall(_) | DemandError::UnknownTarget(_) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<LearnError> for CliError {
    fn from(e: LearnError) -> Self {
        match e {
            LearnError::InvalidHyper { .. } | LearnError::Json(_) => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Demand(d) => d.into(),
            EvalError::Learn(l) => l.into(),
            EvalError::InvalidParam { .. } | EvalError::Unsupported(_) | EvalError::FeatureMismatch { .. } => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Data(other.to_string()),
        }
    }
}
