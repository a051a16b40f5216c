use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is singular or not positive definite")]
    Singular,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("decision is infeasible (residual {residual:e})")]
    InfeasibleDecision { residual: f64 },

    #[error("linear program is {0}")]
    LpStatus(&'static str),

    #[error("simplex exceeded {0} pivots")]
    PivotLimit(usize),

    #[error("QP solver did not reach accuracy after {iterations} iterations (primal {primal:e}, dual {dual:e})")]
    SolverAccuracy { iterations: usize, primal: f64, dual: f64 },

    #[error("projections are stale for sample {index} (distance mismatch {mismatch:e})")]
    StaleProjection { index: usize, mismatch: f64 },

    #[error("{0} is undefined for this input")]
    Undefined(&'static str),

    #[error("sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid field `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("unsupported schema version {0}")]
    SchemaVersion(u64),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at_sample(self, index: usize) -> Self {
        match self {
            e @ Error::Sample { .. } => e,
            e => Error::Sample {
                index,
                source: Box::new(e),
            },
        }
    }

    /// True for failures of the numerical machinery (solvers, projections),
    /// as opposed to bad input.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::Singular
            | Error::LpStatus(_)
            | Error::PivotLimit(_)
            | Error::SolverAccuracy { .. }
            | Error::StaleProjection { .. }
            | Error::Undefined(_) => true,
            Error::Sample { source, .. } => source.is_numeric(),
            _ => false,
        }
    }

    /// Index of the failing sample when the error was raised inside a per-sample loop.
    pub fn sample_index(&self) -> Option<usize> {
        match self {
            Error::Sample { index, .. } => Some(*index),
            _ => None,
        }
    }
}
