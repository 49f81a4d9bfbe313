use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid has {requested} points, which is not a power of two (nearest valid total: {suggested})")]
    NotPowerOfTwo { requested: usize, suggested: usize },

    #[error("n_wells must be odd and at least 3, got {0}")]
    InvalidWellCount(usize),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("states live on different grids")]
    GridMismatch,

    #[error("basis index {index} out of range ({len} states)")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("central well holds {found} localized state(s) at r = {r}; at least 2 are required")]
    TooShallow { r: f64, found: usize },

    #[error("propagation diverged at step {step} (norm^2 = {norm})")]
    NonFinite { step: usize, norm: f64 },

    #[error("fit needs at least 4 samples, got {0}")]
    TooFewSamples(usize),

    #[error("fit design matrix is rank deficient")]
    RankDeficient,

    #[error("visibility undefined for p_max = 0")]
    UndefinedVisibility,

    #[error("stationary-state solve failed at depth r = {r}: {source}")]
    DepthFailed { r: f64, source: Box<Error> },

    #[error("config line {line}, key `{key}`: {message}")]
    Config { line: usize, key: String, message: String },

    #[error("config: missing required key `{0}`")]
    MissingKey(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
