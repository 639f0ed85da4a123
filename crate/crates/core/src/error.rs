use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid truncation radius {0}: must be at least 1")]
    InvalidTruncation(usize),

    #[error("lattice truncated at M = {m} does not cover the shell N <= |k| <= 2N for N = {n}; M must be >= 2N")]
    ShellTruncated { n: usize, m: usize },

    #[error("lattice vector {0:?} is not an enumerated mode")]
    UnknownMode([i32; 3]),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("ensemble is missing the path for mode {0:?} (negated mode required)")]
    IncompleteEnsemble([i32; 3]),

    #[error("partition with {n} intervals exceeds the ensemble resolution of {resolution} intervals; refine the ensemble first")]
    RefineFirst { n: usize, resolution: usize },

    #[error("incompatible grids: {0}")]
    GridIncompatible(String),

    #[error("seminorm undefined: {0}")]
    UndefinedSeminorm(String),

    #[error("reality symmetry broken at k = {k:?} (defect {defect:e})")]
    Symmetry { k: [i32; 3], defect: f64 },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("time {t} outside the driver range [0, {horizon}]")]
    TimeRange { t: f64, horizon: f64 },

    #[error("unknown key `{key}`; valid keys are: {valid}")]
    UnknownKey { key: String, valid: String },

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
