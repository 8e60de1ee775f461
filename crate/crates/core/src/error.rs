use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("did not converge: {0}")]
    NoConvergence(String),

    #[error("guard rail: {0}")]
    GuardRail(String),

    #[error("degenerate gap: {0}")]
    DegenerateGap(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("schema error at {pointer}: {message}")]
    Schema { pointer: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
