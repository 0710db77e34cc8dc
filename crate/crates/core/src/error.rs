use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invariant measure is not unique: {} recurrent classes {classes:?}", classes.len())]
    NonUniqueInvariant { classes: Vec<Vec<usize>> },

    #[error("ODE tolerance {tolerance:e} not met at t = {t} (step {step:e}, local error {error:e})")]
    OdeTolerance {
        t: f64,
        step: f64,
        error: f64,
        tolerance: f64,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
