use thiserror::Error;

/// Errors produced by instance handling, the game environment, assignment,
/// and the classical baselines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite coordinate input")]
    NonFiniteInput,

    #[error("instance must have at least {min} vertices, got {n}")]
    InvalidSize { n: usize, min: usize },

    #[error("invalid tour: {reason}")]
    InvalidTour { reason: String },

    #[error("reference objective must be positive, got {bks}")]
    InvalidBaseline { bks: f64 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unsupported feature: {0}")]
    Unsupported(String),

    #[error("agent count K={k} out of range for n={n} (need 2 <= K <= n/2)")]
    InvalidAgentCount { k: usize, n: usize },

    #[error("invalid start vertices: {reason}")]
    InvalidStart { reason: String },

    #[error("infeasible assignment: {0}")]
    Infeasible(String),

    #[error("problem too large: {0}")]
    TooLarge(String),

    #[error("invalid action: {0}")]
    InvalidAction(String),

    #[error("joint action conflict: vertex {vertex} chosen by more than one agent")]
    JointActionConflict { vertex: usize },

    #[error("state is not terminal")]
    NotTerminal,

    #[error("wrong phase: expected {expected}, state is in {actual}")]
    WrongPhase {
        expected: &'static str,
        actual: &'static str,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
