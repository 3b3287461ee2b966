use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("not a density operator: {0}")]
    InvalidDensity(String),

    #[error("Franson condition violated: {0}")]
    FransonInvalid(String),

    #[error("missing setting for filter expansion: {0}")]
    MissingSetting(String),

    #[error("degenerate fringe grid: {0}")]
    DegenerateGrid(String),

    #[error("no convergence after {iterations} iterations: {what}")]
    NonConvergence { what: String, iterations: usize },

    #[error("channel {0} is outside the supported ITU grid")]
    OutOfGrid(i32),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
