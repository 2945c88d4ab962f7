use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("length mismatch: expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("damping hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("unsupported damping kind: {0}")]
    UnsupportedDamping(String),
    #[error("matrix is numerically singular at pivot {0}")]
    Singular(usize),
    #[error(
        "smallest singular value did not converge after {iterations} iterations \
         (estimate {estimate:e}, relative residual {residual:e})"
    )]
    NonConvergence {
        iterations: usize,
        estimate: f64,
        residual: f64,
    },
    #[error("unresolved grid: {0}")]
    Unresolved(String),
    #[error("fit window holds {got} samples, at least {needed} required")]
    TooFewSamples { got: usize, needed: usize },
    #[error("energy increased from {before:e} to {after:e} at t = {time}")]
    EnergyIncrease { before: f64, after: f64, time: f64 },
    #[error("point is off the characteristic set: relative defect {defect:e}")]
    OffCharacteristic { defect: f64 },
    #[error("geometric control not certified: {0}")]
    NotCertified(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
