use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("no data rows")]
    NoData,

    #[error("malformed row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },

    #[error("duplicate date {0}")]
    DuplicateDate(chrono::NaiveDate),

    #[error("insufficient data: need {needed}, have {have}")]
    InsufficientData { needed: usize, have: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("network error fetching {url}: {reason}")]
    Network { url: String, reason: String },

    #[error("http status {status} from {url}")]
    HttpStatus { url: String, status: u16 },

    #[error("optimizer did not converge after {iterations} iterations (gradient norm {gradient_norm:.3e})")]
    NonConvergence { iterations: usize, gradient_norm: f64 },

    #[error("non-stationary solution: {0}")]
    NonStationary(String),

    #[error("zero variance")]
    ZeroVariance,

    #[error("singular regression")]
    Singular,

    #[error("SVR solver hit iteration cap {iterations} with KKT violation {violation:.3e}")]
    SolverCap { iterations: usize, violation: f64 },

    #[error("training diverged at epoch {epoch}, sample {sample}")]
    Divergence { epoch: usize, sample: usize },

    #[error("all candidates failed: {0}")]
    AllFailed(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn insufficient(needed: usize, have: usize) -> Self {
        Error::InsufficientData { needed, have }
    }
}
