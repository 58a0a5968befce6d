use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{what}: expected dimension {expected}, got {got}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        got: usize,
    },

    #[error("k_min exceeds arm count ({k_min} > {arms})")]
    KminExceedsArms { k_min: usize, arms: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("instance {instance}: missing vote for arm {arm}")]
    MissingVote { instance: String, arm: usize },

    #[error("instance {instance}: label {label} out of range (M = {m})")]
    LabelOutOfRange {
        instance: String,
        label: u32,
        m: u32,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("subset of {0} arms is too large for exact enumeration (max 20)")]
    SubsetTooLarge(usize),

    #[error("non-finite value in {0}; state is corrupted")]
    NonFinite(String),

    #[error(
        "target correlation {target} for pair ({i}, {j}) is outside the attainable \
         interval [{lo:.6}, {hi:.6}] for the given marginals"
    )]
    UnattainableCorrelation {
        i: usize,
        j: usize,
        target: f64,
        lo: f64,
        hi: f64,
    },

    #[error("matrix is not factorizable: {0}")]
    Factorization(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
