use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("input outside the admissible box: {0:?}")]
    Domain(Vec<f64>),

    #[error("integration blew up at t = {time}")]
    IntegrationBlowup { time: f64 },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("unsupported input: {0}")]
    UnsupportedInput(String),

    #[error("sample step {dt} too coarse for recurrence window {tau} (need dt <= tau/10)")]
    Resolution { dt: f64, tau: f64 },

    #[error("spanning instance too large: {candidates} candidates x {points} initial points")]
    InstanceTooLarge { candidates: usize, points: usize },

    #[error("empirical rate undefined: instance at T = {horizon} is infeasible")]
    RateUndefined { horizon: f64 },

    #[error("reference controller failed validation at {} state(s), first {:?}", .failing.len(), .failing.first())]
    ControllerInvalid { failing: Vec<Vec<f64>> },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("guarantee violated at step {step}: {detail}")]
    GuaranteeViolation { step: usize, detail: String },

    #[error("sensor and controller mirrors diverged at step {step}")]
    Determinism { step: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at record {record}: {message}")]
    Parse { record: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension { expected, got });
    }
    Ok(())
}
