//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("schema mismatch at line {line}: expected {expected} features, got {got}")]
    SchemaMismatch {
        line: usize,
        expected: usize,
        got: usize,
    },

    #[error("integrity error at line {line}: session {session_id}: {rule}")]
    Integrity {
        session_id: String,
        line: usize,
        rule: String,
    },

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("degenerate split: {0}")]
    DegenerateSplit(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("need at least {need} rows, got {got}")]
    NotEnoughRows { need: usize, got: usize },

    #[error("covariance is singular after regularization: dimensions {i} and {j} are linearly dependent")]
    SingularCovariance { i: usize, j: usize },

    #[error("mixture component {k} lost all responsibility mass after one re-seed")]
    EmptyComponent { k: usize },

    #[error("component index {k} out of range for {p} components")]
    ComponentIndex { k: usize, p: usize },

    #[error("unknown feature name: {0}")]
    UnknownFeature(String),

    #[error("delta out of range: {0}")]
    DeltaOutOfRange(String),

    #[error("peak density must be positive, got {0}")]
    NonpositivePeak(f64),

    #[error("sampler accepted zero sessions; the goal deltas are too extreme for this data, try milder values")]
    EmptySample,

    #[error("input contains a single class: {0}")]
    SingleClass(String),

    #[error("mismatched report grids: {0}")]
    GridMismatch(String),

    #[error("unsupported format version {got}, expected {expected}")]
    FormatVersion { expected: u32, got: u32 },

    #[error("corrupt model file: {0}")]
    Corrupt(String),

    #[error("model was trained against a different schema (hash {model} vs {data})")]
    SchemaHash { model: String, data: String },

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Tag an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &str) -> Error {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }
}
