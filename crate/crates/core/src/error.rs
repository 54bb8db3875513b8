use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        what: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("assignment is infeasible: {0}")]
    InfeasibleAssignment(String),

    #[error("instance too large to enumerate: {count} matchings exceeds limit {limit}")]
    InstanceTooLarge { count: u128, limit: u128 },

    #[error("cost support too large: {0}")]
    SupportTooLarge(String),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("price series row {row}: {message}")]
    PriceParse { row: usize, message: String },

    #[error("price series row {row}: negative price {price}")]
    NegativePrice { row: usize, price: f64 },

    #[error("price series is empty")]
    EmptySeries,

    #[error("delta grid is empty")]
    EmptyDeltaGrid,

    #[error("invalid config: {0}")]
    Config(String),

    #[error("replay mismatch in run {run} at slot {slot}:\n  stored:   {stored}\n  replayed: {replayed}")]
    ReplayMismatch {
        run: usize,
        slot: u64,
        stored: String,
        replayed: String,
    },

    #[error("missing artifact: {}", .0.display())]
    MissingArtifact(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
