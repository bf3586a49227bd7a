use thiserror::Error;

/// Errors raised across the sampling and regression pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is rank deficient: effective rank {rank} < {cols} columns")]
    RankDeficient { rank: usize, cols: usize },
    #[error("matrix must be square, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("sample size k = {k} is infeasible for n = {n}")]
    InfeasibleK { k: usize, n: usize },
    #[error("bad input: {0}")]
    BadInput(String),
    #[error("tree would be empty: every index has inclusion probability 1")]
    EmptyTree,
    #[error("probability mass {0} is not an integer")]
    NonIntegerMass(f64),
    #[error("index {index} out of range for {len} rows")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("value {0} outside the domain")]
    OutOfDomain(f64),
    #[error("adaptive quadrature failed to reach tolerance {0:e}")]
    QuadratureFailure(f64),
    #[error("polynomial is identically zero")]
    ZeroPolynomial,
    #[error("ODE solver diverged at t = {0}")]
    SolverDiverged(f64),
    #[error("enumeration over {leaves} leaves exceeds the cap of {cap}")]
    TooLarge { leaves: usize, cap: usize },
    #[error("conditioning event has probability zero")]
    ImpossibleCondition,
    #[error("vector is not a least-squares residual: |U^T r| = {0:e}")]
    NotAResidual(f64),
    #[error("no k in the sweep reaches the target error")]
    TargetNotReached,
    #[error("sample set is empty")]
    EmptySample,
    #[error("i/o: {0}")]
    Io(String),
    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
