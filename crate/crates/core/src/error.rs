use thiserror::Error;

/// Errors produced by the numerical kernels, solvers and experiment harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error in {func}: argument {value} is outside the admissible range")]
    Domain { func: &'static str, value: f64 },

    #[error("invalid bracket [{lo}, {hi}]")]
    InvalidBracket { lo: f64, hi: f64 },

    #[error("bracket expansion reached the cap {cap:e}; objective still increasing")]
    BracketCap { cap: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian (max asymmetry {asymmetry:e})")]
    NotHermitian { asymmetry: f64 },

    #[error("matrix is not positive semidefinite")]
    Indefinite,

    #[error("shape error: {0}")]
    Shape(String),

    #[error("rank deficient: only {found} of {needed} rows have a nonzero residual")]
    RankDeficient { needed: usize, found: usize },

    #[error("solver did not converge within {iterations} iterations (gap {gap:e})")]
    NotConverged { iterations: usize, gap: f64 },

    #[error("grid point K = {k}, trial {trial}: {source}")]
    Trial { k: u64, trial: usize, source: Box<Error> },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
