use std::path::PathBuf;

/// Errors produced by the affect-recognition toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}:{line}: parse error: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("rating {value} for rater `{rater}`, item `{item}` ({attribute}) lies outside scale [{min}, {max}]")]
    ScaleViolation {
        rater: String,
        item: String,
        attribute: String,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("degenerate range: all values equal {0}")]
    DegenerateRange(f64),
    #[error("rater `{0}` has no ratings")]
    EmptyRater(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("length mismatch for {what}: expected {expected}, got {actual}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("dimension mismatch: model expects {expected} features, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("kappa undefined: chance agreement equals 1")]
    UndefinedKappa,
    #[error("items carry unequal numbers of ratings ({first} vs {other})")]
    UnequalRatings { first: usize, other: usize },
    #[error("no pairable values: expected disagreement is zero")]
    NoPairableValues,
    #[error("zero variance in {0}")]
    ZeroVariance(&'static str),
    #[error("clip too short: {samples} samples, need at least {needed}")]
    TooShort { samples: usize, needed: usize },
    #[error("invalid band [{low}, {high}] Hz for sample rate {sample_rate} Hz")]
    InvalidBand { low: f64, high: f64, sample_rate: f64 },
    #[error("epoch `{0}` has no baseline segment")]
    MissingBaseline(String),
    #[error("data has rank zero")]
    RankZero,
    #[error("training data contains a single class")]
    SingleClass,
    #[error("non-finite feature at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("task {0} has no training items")]
    EmptyTask(String),
    #[error("input length {actual} is too short for the network (need at least {min})")]
    InputTooShort { actual: usize, min: usize },
    #[error("class {label} has {count} items, need at least {needed}")]
    InsufficientClassCount {
        label: String,
        count: usize,
        needed: usize,
    },
    #[error("posterior sets are misaligned: {0}")]
    Misaligned(String),
    #[error("infeasible schedule: {0}")]
    InfeasibleSchedule(String),
    #[error("instance too large for exhaustive search: {candidates} candidates exceed {limit}")]
    InstanceTooLarge { candidates: u128, limit: u128 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("linear algebra failure: {0}")]
    Numerical(String),
    #[error("unsupported format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Wav(#[from] hound::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
