use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    // table data
    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("header mismatch: expected [{expected}], found [{found}]")]
    HeaderMismatch { expected: String, found: String },
    #[error("could not parse line {line}, column `{column}`: {reason}")]
    TypeParseError {
        line: u64,
        column: String,
        reason: String,
    },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("io error: {0}")]
    Io(String),

    // metrics, domains and oracles
    #[error("dataset is not in the domain: {0}")]
    DomainMismatch(String),
    #[error("metric mismatch: {0}")]
    MetricMismatch(String),
    #[error("measure mismatch: {0}")]
    MeasureMismatch(String),
    #[error("not a probability mass function: {0}")]
    NotAPmf(String),
    #[error("invalid Renyi order {0}: orders must be finite and > 1")]
    BadAlpha(f64),
    #[error("empty list of distance maps")]
    EmptyList,

    // transformations
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),
    #[error("type error: {0}")]
    TypeError(String),
    #[error("identifier column `{0}` must be carried through unchanged")]
    IdColumnDropped(String),
    #[error("join key `{column}` has type {left} on the left and {right} on the right")]
    KeyTypeMismatch {
        column: String,
        left: String,
        right: String,
    },
    #[error("bound must be a positive integer, got {0}")]
    NonPositiveBound(u64),
    #[error("identifier column missing: {0}")]
    MissingIdColumn(String),
    #[error("subset index {index} out of range for {num_subsets} subsets")]
    BadIndex { index: usize, num_subsets: usize },

    // measurements
    #[error("epsilon must be positive")]
    NonPositiveEpsilon,
    #[error("sigma must be positive and finite")]
    NonPositiveSigma,
    #[error("invalid clamping bounds [{low}, {high}]")]
    BadBounds { low: f64, high: f64 },
    #[error("granularity must be positive")]
    NonPositiveGranularity,
    #[error("quantile must lie in [0, 1], got {0}")]
    BadQuantile(f64),
    #[error("privacy function must have linear or quadratic shape: {0}")]
    NonLinearPrivacyFunction(String),
    #[error("key column missing: {0}")]
    MissingKeyColumn(String),
    #[error("expected {expected} measurements, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("insufficient budget: requested {requested}, remaining {remaining}")]
    InsufficientBudget { requested: String, remaining: String },
    #[error("privacy guarantee too weak: loss {loss} exceeds spend {spend}")]
    GuaranteeTooWeak { loss: String, spend: String },

    // session
    #[error("session requires at least one table")]
    EmptyTables,
    #[error("query type check failed: {0}")]
    TypeCheckError(String),
    #[error("unbounded sensitivity: {0}")]
    UnboundedSensitivity(String),
    #[error("no linear accounting path: {0}")]
    NonLinearPath(String),
    #[error("unsupported under this output measure: {0}")]
    UnsupportedMeasure(String),
    #[error("invalid spend: {0}")]
    InvalidSpend(String),
    #[error("keyset type mismatch: {0}")]
    TypeMismatch(String),
    #[error("could not parse budget `{0}`")]
    BudgetParse(String),
    #[error("budget subtraction below zero")]
    NegativeBudget,
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
