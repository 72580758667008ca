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
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("label column `{0}` not found in header")]
    MissingLabelColumn(String),
    #[error("non-numeric feature at row {row}, column `{column}`: {value:?}")]
    NonNumericFeature {
        row: usize,
        column: String,
        value: String,
    },
    #[error("label column has {0} distinct value(s), expected exactly 2")]
    LabelCardinality(usize),
    #[error("row {row} has {found} cells, expected {expected}")]
    RaggedRow {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("invalid label {0}, expected 0 or 1")]
    InvalidLabel(u8),
    #[error("point {index} has {found} features, expected {expected}")]
    FeatureCount {
        index: usize,
        found: usize,
        expected: usize,
    },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("class {0} has no data points")]
    EmptyClass(u8),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("requested {requested} features but dataset has {available}")]
    TooManyFeatures { requested: usize, available: usize },
    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dataset has {points} points, fewer than the {models} ensemble members")]
    TooFewPoints { points: usize, models: usize },
    #[error("{step}: {source}")]
    Step {
        step: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error("unknown perturbation `{0}` (expected zeroing, noising, out-of-ranging or label-flipping)")]
    UnknownPerturbation(String),
    #[error("grid file line {line}: {message}")]
    Grid { line: usize, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_step(step: &'static str) -> impl FnOnce(Error) -> Error {
        move |source| Error::Step {
            step,
            source: Box::new(source),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
