use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("ingestion error at row {row}: {message}")]
    Ingestion { row: usize, message: String },

    #[error("channel `{channel}` is constant over the training prefix (min = max = {value})")]
    DegenerateChannel { channel: String, value: f64 },

    #[error("series too short: need at least {required} samples, got {actual}")]
    Window { required: usize, actual: usize },

    #[error("split error: {0}")]
    Split(String),

    #[error("dimension mismatch in {what}: expected {expected}, got {actual}")]
    Dimension {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("model has no rules")]
    Uninitialized,

    #[error("rule index {index} out of range for {len} rules")]
    InvalidIndex { index: usize, len: usize },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("empty input")]
    EmptyInput,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("incomplete score matrix: {0}")]
    IncompleteMatrix(String),

    #[error("unsupported significance level {0} (supported: 0.05, 0.01)")]
    UnsupportedAlpha(f64),

    #[error("configuration error in {file}: {message}")]
    Config { file: String, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
