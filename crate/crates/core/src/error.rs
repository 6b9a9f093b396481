use thiserror::Error;

#[derive(Debug, Error)]
pub enum VoaError {
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),

    /// The computation needs states above the truncation degree. This is a
    /// window effect, never an identity failure.
    #[error("insufficient truncation: need N >= {required}, model has N = {available}")]
    InsufficientTruncation { required: usize, available: usize },

    #[error("state is not homogeneous")]
    NotHomogeneous,

    #[error("mode index {index} outside the stored range")]
    ModeOutOfRange { index: i64 },

    #[error("{0}")]
    NotApplicable(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("Gram block at degree {degree} is not Hermitian")]
    NonHermitianGram { degree: usize },

    #[error("Gram block at degree {degree} is not positive definite")]
    NotPositiveDefinite { degree: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl VoaError {
    /// True for numerical breakdowns (as opposed to bad input or a window
    /// that is too small).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Self::NonHermitianGram { .. } | Self::NotPositiveDefinite { .. })
    }
}

pub type Result<T, E = VoaError> = std::result::Result<T, E>;
