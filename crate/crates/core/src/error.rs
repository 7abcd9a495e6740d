use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian (anti-Hermitian residual {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("eigensolver did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("invalid stochastic matrix: {0}")]
    InvalidStochastic(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed problem: {0}")]
    MalformedProblem(String),

    #[error("solver undecided: {0}")]
    Undecided(String),

    #[error("ordering violation: {0}")]
    OrderingViolation(String),

    #[error("internal consistency failure: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
