use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("column {column} is constant (variance {variance:e})")]
    DegenerateColumn { column: usize, variance: f64 },

    #[error("normal equations are singular even after ridge jitter")]
    SingularSystem,

    #[error("invalid privacy budget: {0}")]
    InvalidBudget(String),

    #[error("privacy budget exhausted: {0}")]
    BudgetExceeded(String),

    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },

    #[error("treatment arm `{0}` is empty")]
    EmptyArm(&'static str),

    #[error("calibration infeasible after {iterations} iterations (constraint residual {residual:e})")]
    Infeasible { iterations: usize, residual: f64 },

    #[error("every bootstrap replicate failed ({failed} of {requested})")]
    AllReplicatesFailed { failed: usize, requested: usize },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    /// True for failures caused by the numbers rather than by the shape of
    /// the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateColumn { .. }
                | Error::SingularSystem
                | Error::Infeasible { .. }
                | Error::AllReplicatesFailed { .. }
                | Error::DegenerateSample(_)
        )
    }
}
