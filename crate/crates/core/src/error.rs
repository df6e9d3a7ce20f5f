use thiserror::Error;

/// Boxed error produced by an external predictor (subprocess, host callback, ...).
pub type PredictorError = Box<dyn std::error::Error + Send + Sync + 'static>;

#[derive(Debug, Error)]
pub enum XaiError {
    #[error("empty input")]
    EmptyInput,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },

    #[error("rank deficient")]
    RankDeficient,

    #[error("oracle limit: {features} features exceeds the enumeration limit of {limit}")]
    OracleLimit { features: usize, limit: usize },

    #[error("undefined AUC: {0}")]
    UndefinedAuc(&'static str),

    #[error("predictor failed on batch {batch} (first sample {first_sample}): {source}")]
    Predictor {
        batch: usize,
        first_sample: usize,
        #[source]
        source: PredictorError,
    },
}

pub type Result<T> = std::result::Result<T, XaiError>;

pub(crate) fn shape_err(msg: impl Into<String>) -> XaiError {
    XaiError::Shape(msg.into())
}

pub(crate) fn invalid(msg: impl Into<String>) -> XaiError {
    XaiError::InvalidArgument(msg.into())
}
