use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("mode {mode} out of range for order-{order} tensor")]
    ModeOutOfRange { mode: usize, order: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value at position {0}")]
    NonFinite(usize),

    /// A contraction vanished mid-iteration, so the normalized gradient map is undefined.
    #[error("degenerate point: contraction along mode {mode} has norm {norm:e}")]
    Degenerate { mode: usize, norm: f64 },

    #[error("matrix is rank deficient (smallest singular value {0:e})")]
    RankDeficient(f64),

    #[error("active set contains index {0} with zero singular value")]
    ZeroSingularValue(usize),

    #[error("malformed sign pattern: {0}")]
    MalformedSigns(String),

    #[error("bisection target {target} is not bracketed on ({lo}, {hi})")]
    NotBracketed { target: f64, lo: f64, hi: f64 },

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
