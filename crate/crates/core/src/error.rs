use thiserror::Error;

/// Errors raised by the planning, scheduling and simulation layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("time {t} outside trajectory domain [{start}, {end}]")]
    Domain { t: f64, start: f64, end: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("entry speed {v0} exceeds speed limit {v_max}")]
    InfeasibleEntry { v0: f64, v_max: f64 },

    #[error(
        "requested merging-zone entry {requested} is earlier than the dynamic lower bound {bound}"
    )]
    InfeasibleSchedule { requested: f64, bound: f64 },

    #[error("degenerate horizon: terminal time {tm} must exceed initial time {t0}")]
    DegenerateHorizon { t0: f64, tm: f64 },

    #[error("no admissible control reaches {distance} m in {horizon} s: {reason}")]
    InfeasibleHorizon {
        distance: f64,
        horizon: f64,
        reason: String,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("predecessor context error: {0}")]
    Context(String),

    #[error("negative speed {0} passed to fuel model")]
    NegativeSpeed(f64),

    #[error("safety monitor violation: {0}")]
    MonitorViolation(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
