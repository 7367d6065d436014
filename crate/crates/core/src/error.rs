use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("ladder point {index} failed its consistency check (residual {residual:e})")]
    Ladder { index: usize, residual: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("return time exceeded the cap of {cap} iterations")]
    ReturnCapExceeded { cap: u64 },

    #[error("spectral gap lost at t = {t}: {detail}")]
    GapLoss { t: f64, detail: String },

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("series is not of renewal type: spectral radius of R(1) is {radius}")]
    NotRenewal { radius: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
