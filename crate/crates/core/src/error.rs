use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("window/hop pair violates the squared-window overlap-add condition (relative deviation {deviation:.3e})")]
    Cola { deviation: f64 },
    #[error("empty input")]
    EmptyInput,
    #[error("input too short: need at least {min} samples, got {actual}")]
    TooShort { min: usize, actual: usize },
    #[error("sample rate mismatch: expected {expected} Hz, got {actual} Hz")]
    SampleRateMismatch { expected: u32, actual: u32 },
    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },
    #[error("domain mismatch: expected {expected} domain")]
    DomainMismatch { expected: &'static str },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("NNLS did not converge within {max_iter} iterations at frame {frame}")]
    NnlsNotConverged { frame: usize, max_iter: usize },
    #[error("{0}")]
    Undefined(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("wav: {0}")]
    Wav(#[from] hound::Error),
}

impl Error {
    pub(crate) fn shape(expected: impl ToString, actual: impl ToString) -> Self {
        Error::ShapeMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
