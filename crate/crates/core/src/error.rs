use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid conductance law: {0}")]
    InvalidLaw(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("horizon mismatch: state has t={state}, outcome has t={outcome}")]
    HorizonMismatch { state: f64, outcome: f64 },

    #[error("not enough samples: need at least {needed}, have {have}")]
    NotEnoughSamples { needed: u64, have: u64 },

    #[error("oracle guard: {0}")]
    OracleGuard(String),

    #[error("projected {projected} random draws exceed the budget of {budget}")]
    BudgetExceeded { projected: u128, budget: u64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable tag for the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidLaw(_) => "invalid_law",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::HorizonMismatch { .. } => "horizon_mismatch",
            Error::NotEnoughSamples { .. } => "not_enough_samples",
            Error::OracleGuard(_) => "oracle_guard",
            Error::BudgetExceeded { .. } => "budget_exceeded",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
