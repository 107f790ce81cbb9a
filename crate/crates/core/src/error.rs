use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrogError {
    #[error("invalid parameter `{key}`: {reason}")]
    InvalidParameter { key: String, reason: String },

    #[error("waiting-time law has an atom at zero; waits must be strictly positive")]
    AtomAtZero,

    #[error("schedule impossible at n = {n}: g(delta_n, 2 a_n) = 0 (gapped waiting law)")]
    GappedSchedule { n: usize },

    #[error("schedule impossible at n = {n}: b_n is not finite")]
    UnboundedSchedule { n: usize },

    #[error("policies are not comparable: {0}")]
    IncomparablePolicies(String),

    #[error("axis {axis} out of range for dimension {dim}")]
    AxisOutOfRange { axis: usize, dim: usize },

    #[error("degenerate growth curve: {0}")]
    DegenerateGrowth(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("event queue exhausted")]
    Exhausted,
}

impl FrogError {
    pub fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Self {
        FrogError::InvalidParameter { key: key.into(), reason: reason.into() }
    }
}

pub type Result<T, E = FrogError> = std::result::Result<T, E>;
