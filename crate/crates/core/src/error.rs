use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("need at least 3 point pairs, got {0}")]
    InsufficientPairs(usize),
    #[error("degenerate sample: source points are collinear or coincident")]
    DegenerateSample,
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("k = {k} exceeds the {count} indexed points")]
    KTooLarge { k: usize, count: usize },
    #[error("invalid metric spec: {0}")]
    InvalidSpec(String),
    #[error("need at least 3 correspondences, got {0}")]
    TooFewCorrespondences(usize),
    #[error("no non-degenerate sample found after {0} retries")]
    PersistentDegeneracy(usize),
    #[error("metric {0} needs source cloud and target index")]
    MissingClouds(&'static str),
    #[error("bad configuration: {0}")]
    BadConfig(String),
    #[error("ground-truth pair set is empty")]
    EmptyGroundTruth,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
