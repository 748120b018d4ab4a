use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("horizon must be positive and finite, got {0}")]
    NonpositiveHorizon(f64),

    #[error("jump time {time} lies outside (0, {horizon}]")]
    JumpOutOfRange { time: f64, horizon: f64 },

    #[error("point ({t1}, {t2}) is not in the triangle 0 <= t1 <= t2 <= {horizon}")]
    DomainViolation { t1: f64, t2: f64, horizon: f64 },

    #[error("sample batch is empty")]
    EmptyBatch,

    #[error("horizon mismatch: {left} vs {right}")]
    HorizonMismatch { left: f64, right: f64 },

    #[error("function is not monotone on [{lo}, {hi}]")]
    NonmonotoneDetected { lo: f64, hi: f64 },

    #[error("tolerance {tol} too coarse for gate spacing {spacing}")]
    ToleranceTooCoarse { tol: f64, spacing: f64 },

    #[error("intensity {value} at ({t0}, {u}) exceeds declared bound {bound}")]
    IntensityExceedsBound {
        t0: f64,
        u: f64,
        value: f64,
        bound: f64,
    },

    #[error("invalid intensity: {0}")]
    InvalidIntensity(String),

    #[error("invalid mean model: {0}")]
    InvalidMean(String),

    #[error("moment order q must exceed 2, got {0}")]
    QOutOfRange(f64),

    #[error("gamma must lie in (0, 1/2), got {0}")]
    GammaOutOfRange(f64),

    #[error("N = {n} is below N_0 = {n0}")]
    BelowN0 { n: u64, n0: u64 },

    #[error("series tail bound {tail} exceeds tolerance {tol} at k_max = {k_max}")]
    TailNotConverged { tail: f64, tol: f64, k_max: usize },

    #[error("estimate {0} is not positive")]
    NonpositiveEstimate(f64),

    #[error("need at least {needed} points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("partial results in {path} belong to config {found}, expected {expected}")]
    ConfigMismatch {
        path: PathBuf,
        found: String,
        expected: String,
    },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True when a numerical guarantee broke at runtime, as opposed to bad
    /// input.
    pub fn is_numeric_contract(&self) -> bool {
        matches!(
            self,
            Error::IntensityExceedsBound { .. }
                | Error::NonmonotoneDetected { .. }
                | Error::TailNotConverged { .. }
        )
    }

    pub fn is_validation(&self) -> bool {
        !self.is_numeric_contract() && !matches!(self, Error::Io(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
