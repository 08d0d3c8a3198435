use thiserror::Error;

/// Errors produced by the toolkit.
///
/// Variants are grouped loosely into input validation, solver failures and
/// internal consistency defects; [`Error::kind`] exposes that grouping.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    InvalidInput(String),

    #[error("{msg} at row {row}")]
    Parse { row: usize, msg: String },

    #[error("empty marginal")]
    EmptyMarginal,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("variable cap exceeded: {vars} variables > cap {cap}")]
    CapExceeded { vars: usize, cap: usize },

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("not a hedonic-form oracle: {0}")]
    NotHedonicForm(String),

    #[error("Newton failed to converge from every start (best gradient norm {best_grad_norm:e})")]
    NewtonFailed { best_grad_norm: f64 },

    #[error("inner maximizer not unique: starts disagree by {disagreement:e} at {witness:?}")]
    NonUniqueMaximizer { disagreement: f64, witness: Vec<f64> },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("linear program infeasible (phase-one residual {0:e})")]
    Infeasible(f64),

    #[error("linear program unbounded")]
    Unbounded,

    #[error("pivot limit {0} reached")]
    PivotLimit(usize),

    #[error("entropic solver did not converge in {iterations} iterations (marginal violation {violation:e})")]
    EntropicNotConverged { iterations: usize, violation: f64 },

    #[error("marginal mismatch: {0}")]
    MarginalMismatch(String),

    #[error("map is not invertible: atoms {first} and {second} share image {image}")]
    NonInvertibleMap {
        first: usize,
        second: usize,
        image: usize,
    },

    #[error("map evaluation failed at support point {index}: {msg}")]
    MapFailure { index: usize, msg: String },

    #[error("surplus evaluation failed at tuple {tuple:?}: {msg}")]
    SurplusFailure { tuple: Vec<usize>, msg: String },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Solver,
    Internal,
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidInput(_)
            | Error::Parse { .. }
            | Error::EmptyMarginal
            | Error::DimensionMismatch { .. }
            | Error::CapExceeded { .. }
            | Error::IndexOutOfRange { .. }
            | Error::NotHedonicForm(_)
            | Error::MarginalMismatch(_)
            | Error::Json(_)
            | Error::Csv(_) => ErrorKind::Validation,
            Error::NewtonFailed { .. }
            | Error::NonUniqueMaximizer { .. }
            | Error::Singular(_)
            | Error::Unbounded
            | Error::PivotLimit(_)
            | Error::EntropicNotConverged { .. }
            | Error::NonInvertibleMap { .. }
            | Error::MapFailure { .. }
            | Error::SurplusFailure { .. } => ErrorKind::Solver,
            Error::Infeasible(_) | Error::Internal(_) => ErrorKind::Internal,
            Error::Io(_) => ErrorKind::Io,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
