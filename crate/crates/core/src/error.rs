use thiserror::Error;

/// Errors produced by graph construction, file I/O, and the numerical kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "expander generation failed for {num_vertices} vertices: best gap {best_gap:.6} \
         below required {min_gap:.6} after {attempts} attempts"
    )]
    GenerationFailed {
        num_vertices: u64,
        best_gap: f64,
        min_gap: f64,
        attempts: u32,
    },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("graph file parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("graph validation failed: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid_argument(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
