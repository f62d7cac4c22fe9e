use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A parameter is outside its admissible range.
    #[error("{0}")]
    InvalidParameter(String),

    #[error("point {0} lies outside the field window")]
    OutsideWindow(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("truncation budget unattainable: expected count {budget:e} at r_max = 2^{exponent}")]
    TruncationUnattainable { budget: f64, exponent: u32 },

    #[error("all particles died before any reached the target")]
    AllParticlesDied,

    #[error("no particle reached the target")]
    EmptyEnsemble,

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
