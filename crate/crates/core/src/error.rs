use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error in {path}: {message}")]
    Csv { path: PathBuf, message: String },
    #[error("non-numeric value {value:?} at row {row}, column {column:?}")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },
    #[error("label column {0} not found")]
    LabelColumnMissing(String),
    #[error("dataset has {0} class(es); at least 2 are required")]
    TooFewClasses(usize),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("class {class} has {count} member(s); stratified split needs at least 2")]
    ClassTooSmall { class: usize, count: usize },
    #[error("mass functions are in total conflict")]
    TotalConflict,
    #[error("invalid mass function: {0}")]
    InvalidMass(String),
    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),
    #[error("no training row with a label different from {0}")]
    NoCounterfactual(usize),
    #[error("feature count {0} too large for exact Shapley enumeration (max {1})")]
    TooManyFeatures(usize, usize),
    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),
    #[error("calibration set mixes uncertainty strategies")]
    MixedStrategies,
    #[error("uncertainty strategy {0} is not available")]
    StrategyUnavailable(String),
    #[error("explainer failed at perturbation {perturbation:?}: {source}")]
    Explainer {
        perturbation: Vec<f64>,
        #[source]
        source: Box<Error>,
    },
    #[error("routing failed ({context}): {source}")]
    Routing {
        context: String,
        #[source]
        source: Box<Error>,
    },
    #[error("config error: {0}")]
    Config(String),
    #[error("serialization error: {0}")]
    Serde(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
