//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("duplicate record id `{0}`")]
    DuplicateId(String),

    #[error("record `{id}`: {message}")]
    InvalidRecord { id: String, message: String },

    #[error("undefined ratio: {term} is zero")]
    UndefinedRatio { term: &'static str },

    #[error("sweep at t_b = {t_b}: undefined ratio ({term} is zero)")]
    SweepUndefined { t_b: f64, term: &'static str },

    #[error(
        "grid point t_b = {t_b} is below the deployment threshold {deployment}; \
             data rejected online cannot be re-thresholded"
    )]
    SweepBelowDeployment { t_b: f64, deployment: f64 },

    #[error("{count} records are missing soft labels (first: {})", first.join(", "))]
    MissingSoftLabels { count: usize, first: Vec<String> },

    #[error("{count} records have no machine score (first: {})", first.join(", "))]
    MissingMachineScores { count: usize, first: Vec<String> },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("calibration: {0}")]
    Calibration(String),

    #[error(
        "{undefined} of {replicates} bootstrap replicates were undefined; \
             the estimate is unstable, consider the approximate estimator"
    )]
    BootstrapUnstable { undefined: usize, replicates: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid_record(id: &str, message: impl Into<String>) -> Self {
        Error::InvalidRecord {
            id: id.to_owned(),
            message: message.into(),
        }
    }
}
