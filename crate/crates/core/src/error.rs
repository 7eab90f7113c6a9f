use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input; `line` is 1-based (CSV lines count the header).
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("invalid problem instance: {0}")]
    InvalidInstance(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no viable bitstrings with Hamming weight {budget} out of {n}")]
    NoViableSolutions { n: usize, budget: usize },

    #[error("approximation ratio undefined: optimal cost is zero")]
    UndefinedRatio,

    #[error("degenerate cost table: best and worst costs coincide")]
    DegenerateTable,

    #[error("distribution is not normalized: total probability {0}")]
    Unnormalized(f64),

    #[error("configuration does not match cost table: {0}")]
    ConfigMismatch(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(line: u64, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }
}
