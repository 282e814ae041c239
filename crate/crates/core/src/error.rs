use std::io;

use thiserror::Error;

/// Errors produced by the estimators, simulators and the command-line frontend.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("fixed-point iteration did not converge after {iterations} iterations (last change {final_delta:e})")]
    NonConvergence { iterations: usize, final_delta: f64 },

    #[error("truncation point {gamma} exceeds every observation")]
    DegenerateTruncation { gamma: f64 },

    #[error("sampler reached {draws} draws without collecting {target_m} uncensored and {target_n} censored records (got {got_m} and {got_n})")]
    TargetsNotReached {
        draws: u64,
        target_m: usize,
        target_n: usize,
        got_m: usize,
        got_n: usize,
    },

    #[error("estimated censored-sample density vanishes at {at}")]
    ZeroDensity { at: f64 },

    #[error("point {point} lies outside the covariance grid [{lo}, {hi}]")]
    GridMismatch { point: f64, lo: f64, hi: f64 },

    #[error("bootstrap aborted after {failures} failed resamples")]
    BootstrapFailed { failures: usize },

    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
