use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the simulation, data generation and inversion layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("positivity violation: u = {value:e} at node {node}, t = {t}")]
    Positivity { t: f64, node: usize, value: f64 },

    #[error("step-size failure at t = {t}: {required} sub-steps required, cap is {cap}")]
    StepSize { t: f64, required: usize, cap: usize },

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("incompatible sensitivity bases: {0}")]
    IncompatibleBasis(String),

    #[error("zero-width concentration interval at c = {0}")]
    ZeroWidthInterval(f64),

    #[error("noise level error: {0}")]
    NoiseLevel(String),

    #[error("forward solve failed for jacobian column {column}: {source}")]
    JacobianColumn {
        column: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("insufficient L-curve sweep: {valid} valid points, at least {required} required")]
    InsufficientSweep { valid: usize, required: usize },

    #[error("rate study: {0}")]
    RateStudy(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than by a numerical
    /// failure during a run.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::Config(_)
                | Error::Parse { .. }
                | Error::DomainMismatch(_)
                | Error::IncompatibleBasis(_)
                | Error::ZeroWidthInterval(_)
                | Error::InsufficientSweep { .. }
                | Error::RateStudy(_)
        )
    }
}

impl Error {
    /// Short stable name for machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::InvalidState(_) => "invalid_state",
            Error::Numerical(_) => "numerical",
            Error::Positivity { .. } => "positivity",
            Error::StepSize { .. } => "step_size",
            Error::DomainMismatch(_) => "domain_mismatch",
            Error::IncompatibleBasis(_) => "incompatible_basis",
            Error::ZeroWidthInterval(_) => "zero_width_interval",
            Error::NoiseLevel(_) => "noise_level",
            Error::JacobianColumn { .. } => "jacobian_column",
            Error::InsufficientSweep { .. } => "insufficient_sweep",
            Error::RateStudy(_) => "rate_study",
            Error::Config(_) => "config",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
