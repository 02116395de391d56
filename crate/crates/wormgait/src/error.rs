//! Error type shared by every pipeline stage.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates its validity range or an inter-parameter constraint.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    /// Requested integration step is too coarse for the fastest time scale.
    #[error("time step {dt} s too coarse: must be positive and at most {max} s")]
    Resolution { dt: f64, max: f64 },

    /// The anchor-update fixpoint did not settle within the iteration guard.
    #[error("anchor switching livelock at t = {t} s: {count} switches in one step")]
    SwitchLivelock { t: f64, count: usize },

    /// A time series that must be uniformly sampled is not.
    #[error("time grid is not uniform near sample {index} (step {got} vs {expected})")]
    NonUniformGrid { index: usize, got: f64, expected: f64 },

    /// Two series that must share a time grid do not.
    #[error("time grids do not match: {0}")]
    GridMismatch(String),

    /// A trace or log is too short for the requested window.
    #[error("trace too short: {0}")]
    TraceTooShort(String),

    /// A log carries no information about the parameters being fitted.
    #[error("degenerate log: {0}")]
    DegenerateLog(String),

    /// Selection from an empty Pareto front.
    #[error("empty Pareto front")]
    EmptyFront,

    /// Bad optimizer or scan configuration.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Malformed input file.
    #[error("{path}: {reason}")]
    Parse { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
