use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operator is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("operator is not positive semidefinite (min eigenvalue {0:e})")]
    NotPositive(f64),

    #[error("state is not normalized (trace {0})")]
    NotNormalized(f64),

    #[error("state is not pure (purity {0})")]
    NotPure(f64),

    #[error("depth {requested} exceeds the enumeration limit {limit}")]
    DepthLimit { requested: usize, limit: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("objective returned a non-finite value at {0:?}")]
    NonFiniteObjective(Vec<f64>),
}
