use std::path::PathBuf;

/// Errors produced by the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid gaussian kernel: {0}")]
    InvalidGaussian(String),

    #[error("architecture line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("weight archive format error: {0}")]
    Format(String),

    #[error("weights do not fit the graph: {0}")]
    WeightMismatch(String),

    #[error("unknown layer `{0}`")]
    UnknownLayer(String),

    #[error("degenerate histogram: fewer than two occupied bins")]
    DegenerateHistogram,

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("invalid homography: {0}")]
    Homography(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {msg}")]
    File { path: PathBuf, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
