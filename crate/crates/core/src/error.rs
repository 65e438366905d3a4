use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("constraint row {row} is not symmetric (deviation {deviation:e})")]
    NonSymmetric { row: usize, deviation: f64 },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("affine constraints are inconsistent (residual {residual:e})")]
    Infeasible { residual: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("reduction did not certify after {restarts} restarts (max violation {max_violation:e})")]
    NotCertified { restarts: usize, max_violation: f64 },

    #[error("no real block-diagonalization found after {attempts} attempts: {reason}")]
    NoRealDecomposition { attempts: usize, reason: String },

    #[error("block-diagonalization failed after {attempts} attempts: {reason}")]
    Decomposition { attempts: usize, reason: String },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("solver: {0}")]
    Solver(String),

    #[error("fetch {name}: {msg}")]
    Fetch { name: String, msg: String },

    #[error("checksum mismatch for {name}: expected {expected}, found {found}")]
    Checksum {
        name: String,
        expected: String,
        found: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
