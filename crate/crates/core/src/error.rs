use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid vector: {0}")]
    InvalidVector(String),
    #[error("points are antipodal; the logarithm map is undefined")]
    Antipodal,
    #[error("concentration must be positive, got {0}")]
    NonPositiveConcentration(f64),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("conditional feasible interval is empty (lower {lower}, upper {upper})")]
    EmptyInterval { lower: f64, upper: f64 },
    #[error("dual ascent did not converge after {iters} iterations (residual {residual})")]
    NotConverged { iters: usize, residual: f64 },
    #[error("prior rejection sampler exceeded {0} attempts")]
    RejectionBudgetExceeded(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid weights: {0}")]
    Weights(String),
    #[error("line {line}: malformed HURDAT2 header: {msg}")]
    MalformedHeader { line: usize, msg: String },
    #[error("line {line}: storm {storm} declares {expected} rows, found {found}")]
    RowCountMismatch { line: usize, storm: String, expected: usize, found: usize },
    #[error("line {line}: bad coordinate {token:?}")]
    BadCoordinate { line: usize, token: String },
    #[error("row {row}: {which} vector norm {norm} outside [0.99, 1.01]")]
    BadNorm { row: usize, which: &'static str, norm: f64 },
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("trace schema version {found} is not supported (expected {expected})")]
    SchemaVersion { expected: u32, found: u32 },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
