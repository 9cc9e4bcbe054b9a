use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("malformed row {row}: {message}")]
    MalformedRow { row: usize, message: String },

    #[error("non-binary treatment at row {row}")]
    NonBinaryTreatment { row: usize },

    #[error("non-finite value in column `{column}` at row {row}")]
    NonFinite { row: usize, column: String },

    #[error("invalid header: {0}")]
    InvalidHeader(String),

    #[error("empty treatment arm")]
    EmptyTreatmentArm,

    #[error("match count M = {m} exceeds the {available} available reference points")]
    MatchCountTooLarge { m: usize, available: usize },

    #[error("match count M must be at least 1")]
    ZeroMatchCount,

    #[error("singular system: pivot {pivot:e} at column {column} below relative threshold")]
    Singular { column: usize, pivot: f64 },

    #[error("basis produced a non-finite value")]
    NonFiniteBasis,

    #[error("unsupported density family `{0}`")]
    UnsupportedDensity(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
