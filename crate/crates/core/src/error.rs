use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected n = {expected}, found n = {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{what}: n = {n} exceeds the limit {limit}")]
    Capacity { what: &'static str, n: usize, limit: usize },

    /// Copeland aggregation requires strict stochastic transitivity.
    /// Items are 0-based.
    #[error("pairwise matrix is not strictly stochastically transitive ({})", describe_sst(.witness, .tie))]
    NotStrictlyTransitive { witness: Option<(usize, usize, usize)>, tie: Option<(usize, usize)> },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("cell cannot be split: no admissible pair")]
    CannotSplit,

    #[error("partition integrity: {0}")]
    PartitionIntegrity(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn describe_sst(witness: &Option<(usize, usize, usize)>, tie: &Option<(usize, usize)>) -> String {
    match (witness, tie) {
        (Some((i, j, k)), _) => format!("intransitive triple ({}, {}, {})", i + 1, j + 1, k + 1),
        (None, Some((i, j))) => format!("tied pair ({}, {})", i + 1, j + 1),
        (None, None) => "unknown".to_string(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;
