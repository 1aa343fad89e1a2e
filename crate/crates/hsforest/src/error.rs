//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by samplers, model fitting, and data generation.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A distribution or model parameter is outside its domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A truncated-normal bound lies beyond +/-38 standard deviations, where
    /// the tail mass underflows to zero.
    #[error("truncated-normal bound beyond +/-38 sd{}", match .row { Some(r) => format!(" (row {r})"), None => String::new() })]
    TailOverflow {
        /// Observation index the failure is attached to, when known.
        row: Option<usize>,
    },

    /// Inputs are structurally inconsistent (dimension or length mismatch,
    /// malformed data).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An estimation routine failed (no events, non-convergence, single-arm
    /// treatment).
    #[error("estimation failed: {0}")]
    Estimation(String),

    /// A simulation scenario specification is invalid.
    #[error("invalid scenario: {0}")]
    Scenario(String),

    /// Censoring-rate calibration could not bracket the target.
    #[error("censoring calibration failed: {0}")]
    Calibration(String),

    /// A requested summary is mathematically undefined on the given data.
    #[error("undefined result: {0}")]
    Undefined(String),

    /// A non-finite value appeared inside an MCMC run.
    #[error("non-finite {what} at iteration {iter}")]
    NonFinite {
        /// Sweep index at which the value was detected.
        iter: usize,
        /// Description of the offending quantity.
        what: String,
    },
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
