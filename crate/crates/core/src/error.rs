use thiserror::Error;

/// Errors surfaced by the exploration/planning library.
#[derive(Debug, Error)]
pub enum RfeError {
    /// A caller-supplied argument violated a precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The confidence set became numerically degenerate: no feasible
    /// parameter was found by sampling or by alternating projection.
    #[error("infeasible confidence set at episode {episode}: {detail}")]
    InfeasibleConfidenceSet { episode: usize, detail: String },
}

pub type Result<T> = std::result::Result<T, RfeError>;

pub fn invalid(msg: impl Into<String>) -> RfeError {
    RfeError::InvalidArgument(msg.into())
}
