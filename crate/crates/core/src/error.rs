use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the labeling and graph-learning pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("report text is empty")]
    EmptyReport,

    #[error("invalid rule set: {0}")]
    InvalidRules(String),

    #[error("invalid config at line {line}: {message}")]
    ConfigAt { line: usize, message: String },

    #[error("invalid knowledge graph config: {0}")]
    InvalidKnowledgeGraph(String),

    #[error("unknown disease `{0}`")]
    UnknownDisease(String),

    #[error("unknown anatomical region `{0}`")]
    UnknownRegion(String),

    #[error("degenerate bounding box: width and height must be positive (got w={w}, h={h})")]
    DegenerateBox { w: f64, h: f64 },

    #[error("graph needs at least {needed} nodes, got {got}")]
    TooFewNodes { needed: usize, got: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("forward cache does not match the supplied graph and parameters")]
    StaleCache,

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },

    #[error("insufficient certain-only studies: need {needed}, have {available}")]
    InsufficientCertainStudies { needed: usize, available: usize },

    #[error("corpus too small: need at least {needed} studies, have {got}")]
    CorpusTooSmall { needed: usize, got: usize },

    #[error("unknown class id {0}")]
    UnknownClass(usize),

    #[error("invalid fusion weights alpha={alpha}, beta={beta}: need alpha, beta >= 0 and alpha + beta <= 1")]
    InvalidFusion { alpha: f64, beta: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown {kind} `{name}` (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// TOML parse error located by line in `text`.
    pub fn config_at(text: &str, err: &toml::de::Error) -> Self {
        Error::ConfigAt {
            line: err
                .span()
                .map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() + 1),
            message: err.message().to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
