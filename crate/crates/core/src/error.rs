use std::path::PathBuf;

use thiserror::Error;

use crate::dataset::Group;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid dataset spec: {0}")]
    Spec(String),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("sensitive column `{column}` has {count} distinct values, expected at most 2")]
    NonBinarySensitive { column: String, count: usize },
    #[error("target column `{column}` has {count} distinct values, expected at most 2")]
    NonBinaryTarget { column: String, count: usize },
    #[error("file has no data rows")]
    EmptyFile,
    #[error("column `{column}` row {row}: `{value}` is not a number")]
    InvalidNumber {
        column: String,
        row: usize,
        value: String,
    },
    #[error("column `{0}` is not numeric")]
    NonNumericColumn(String),
    #[error("invalid split fractions: {0}")]
    InvalidFractions(String),
    #[error("{role} partition is empty but `{method}` needs it")]
    DegenerateSplit { role: &'static str, method: String },
    #[error("training partition is empty")]
    EmptyTrain,
    #[error("training loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown instance id {0}")]
    UnknownId(usize),
    #[error("score {score} for instance {id} is outside [0, 1]")]
    ScoreOutOfRange { id: usize, score: f64 },
    #[error("external score ids do not match the dataset: {0}")]
    IdMismatch(String),
    #[error("misaligned instance ids: {0}")]
    MisalignedIds(String),
    #[error("{0:?} group is empty")]
    EmptyGroup(Group),
    #[error("rate {0} is outside [0, 1]")]
    RateOutOfRange(f64),
    #[error("{group:?} group lacks {missing} labels in the fitting ids")]
    DegenerateGroup { group: Group, missing: &'static str },
    #[error("AUC needs both classes, found only label {0}")]
    SingleClass(u8),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least 2 elements, got {0}")]
    TooShort(usize),
    #[error("NaN encountered in {0}")]
    NotANumber(&'static str),
    #[error("{0:?} group has no positive labels")]
    NoPositivesInGroup(Group),
    #[error("rate denominator has zero mass ({0})")]
    ZeroMassDenominator(&'static str),
    #[error("malformed model file: {0}")]
    ModelFormat(String),
    #[error("method `{method}`: {source}")]
    Method {
        method: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn in_method(self, method: &str) -> Self {
        Error::Method {
            method: method.to_string(),
            source: Box::new(self),
        }
    }
}
