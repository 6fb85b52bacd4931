use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("unknown target column {0:?}")]
    UnknownTargetColumn(String),

    #[error("unknown column {0:?}")]
    UnknownColumn(String),

    #[error("row {row}: expected {expected} cells, found {found}")]
    RowArity {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("missing value in row {row}, column {column:?}")]
    MissingValue { row: usize, column: String },

    #[error("dataset has no rows")]
    EmptyDataset,

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("feature group error: {0}")]
    Group(String),

    #[error("invalid structure: {0}")]
    Structure(String),

    #[error("node {0} has no parent")]
    RootHasNoParent(usize),

    #[error("node {node} has an empty allowed feature set")]
    EmptyFeatureSet { node: usize },

    #[error("empty T_obj: no leaf is marked as a target")]
    EmptyTargets,

    #[error("feature {0} is unsplittable")]
    Unsplittable(usize),

    #[error("brute-force cap exceeded: {needed} candidate paths > {cap}")]
    OracleCap { needed: u128, cap: u128 },

    #[error("rule violates structure: {0}")]
    RuleViolatesSpec(String),

    #[error("invalid solution: {0}")]
    InvalidSolution(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("rule references unknown feature {0:?}")]
    UnknownFeature(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
