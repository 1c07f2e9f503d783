use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("csv parse error at row {row}, column {column}: {message}")]
    CsvParse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("csv structure error: {0}")]
    CsvStructure(String),

    #[error("degenerate dataset: every feature is constant")]
    DegenerateDataset,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("undefined angle: zero-length vector")]
    ZeroVector,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate segment: endpoints coincide")]
    DegenerateSegment,

    #[error("covariance matrix is not symmetric positive-definite")]
    NotPositiveDefinite,

    #[error("k = {k} exceeds the number of points ({n})")]
    KTooLarge { k: usize, n: usize },

    #[error("class {class} is empty")]
    EmptyClass { class: usize },

    #[error("cannot oversample singleton class {class}")]
    SingletonClass { class: usize },

    #[error("class {class} fully enclosed by no man's land: {diagnostics}")]
    FullyEnclosed { class: usize, diagnostics: String },

    #[error("confusion matrix is all zeros")]
    EmptyConfusion,

    #[error("model parse error at line {line}: {message}")]
    ModelParse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
