use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A constructor or generator received an argument outside its domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A closed-form expression was applied outside its hypotheses.
    #[error("precondition violated: {condition}{}", fmt_index(*.index))]
    Precondition {
        condition: String,
        index: Option<usize>,
    },

    /// An allocation picks an action outside the agent's action set.
    #[error("infeasible allocation: agent {agent}: {reason}")]
    InfeasibleAllocation { agent: usize, reason: String },

    /// Malformed game instance (unknown resource, empty action set, too many agents...).
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    /// Every allocation has zero welfare, so the efficiency ratio is undefined.
    #[error("degenerate instance: optimal welfare is zero")]
    ZeroOptimum,

    #[error("enumeration size {size} exceeds cap {cap}")]
    CapExceeded { size: u128, cap: u128 },

    /// The LP backend returned something that cannot happen for valid inputs.
    #[error("solver anomaly: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn fmt_index(index: Option<usize>) -> String {
    match index {
        Some(j) => format!(" (j = {j})"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn precondition(condition: impl Into<String>, index: Option<usize>) -> Self {
        Error::Precondition {
            condition: condition.into(),
            index,
        }
    }
}
