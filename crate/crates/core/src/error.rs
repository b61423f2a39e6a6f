use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("singular or ill-conditioned system (1-norm condition estimate {cond:.3e})")]
    SingularSystem { cond: f64 },

    #[error("matrix is not symmetric (asymmetry {asymmetry:.3e} exceeds {limit:.3e})")]
    NotSymmetric { asymmetry: f64, limit: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error(
        "shift search gave up after {doublings} doublings (mu = {mu:.3e}, lambda_min(H2) = {lambda_min:.3e})"
    )]
    ShiftCap {
        doublings: usize,
        mu: f64,
        lambda_min: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("not enough history: {0}")]
    InsufficientHistory(String),

    #[error("serialization: {0}")]
    Serialization(String),
}

impl Error {
    /// True for failures that the optimizers treat as "skip this update".
    pub fn is_singular(&self) -> bool {
        matches!(self, Error::SingularSystem { .. })
    }
}
