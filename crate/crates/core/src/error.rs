use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("outcome {label} has probability {prob:e}, below the zero-probability threshold")]
    ZeroProbability { label: String, prob: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("training unsupported: {0}")]
    TrainingUnsupported(String),

    #[error("division by a vanishing exact value at {0} grid point(s)")]
    Division(usize),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
