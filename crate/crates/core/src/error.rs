use thiserror::Error;

/// Errors raised by state validation and the analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("not Hermitian: max |M - M^dagger| = {deviation:e}")]
    NotHermitian { deviation: f64 },

    #[error("trace is not 1: trace = {trace}")]
    TraceNotOne { trace: f64 },

    #[error("not positive semidefinite: minimum eigenvalue {min_eigenvalue}")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("vectors are not orthonormal: max |<e_i|e_j> - delta_ij| = {deviation:e}")]
    NotOrthonormal { deviation: f64 },

    #[error("matrix is not unitary: max |U^dagger U - I| = {deviation:e}")]
    NotUnitary { deviation: f64 },

    #[error("vector is not a unit vector: norm = {norm}")]
    NotUnitVector { norm: f64 },

    #[error("outcome index {index} out of range for local dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("map is not a bijection on 0..{dim}: {map:?}")]
    NotBijection { dim: usize, map: Vec<usize> },

    #[error("tolerance {tol} outside the open interval (0, 1/{dim})")]
    InvalidTolerance { tol: f64, dim: usize },

    #[error("{what} = {value} outside the supported range {min}..={max}")]
    OutOfRange {
        what: &'static str,
        value: usize,
        min: usize,
        max: usize,
    },

    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),

    #[error("{0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dims(expected: impl ToString, found: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
