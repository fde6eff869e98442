use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("value outside the operation's domain: {0}")]
    Domain(String),

    #[error("gram matrix is not positive definite (pivot {pivot})")]
    SingularGram { pivot: usize },

    #[error("degenerate pair: the two points coincide in kernel space")]
    DegeneratePair,

    #[error("two-point variance is non-positive ({sigma2:e})")]
    NonPositiveSigma { sigma2: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::SingularGram { .. } | Error::NonPositiveSigma { .. } | Error::DegeneratePair => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
