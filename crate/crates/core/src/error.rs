use std::path::PathBuf;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("index ({row}, {col}) out of range for dimension {dim}")]
    IndexOutOfRange { row: usize, col: usize, dim: usize },

    #[error("non-finite value at ({row}, {col})")]
    NonFiniteEntry { row: usize, col: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix dimension must be at least 1")]
    EmptyMatrix,

    #[error("non-positive pivot {value:e} at index {index}")]
    NonPositivePivot { index: usize, value: f64 },

    #[error("matrices do not share a sparsity pattern")]
    PatternMismatch,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid case geometry: {0}")]
    InvalidCase(String),

    #[error("time {t} outside the load program range [0, {t_end}]")]
    TimeOutOfRange { t: f64, t_end: f64 },

    #[error("mass matrix is singular at DOF {dof}")]
    SingularMass { dof: usize },

    #[error("non-finite state at interval {interval}")]
    NonFiniteState { interval: usize },

    #[error("zero effective load: cannot build a reduced basis")]
    ZeroLoad,

    #[error("reduced stiffness matrix is singular")]
    SingularReducedSystem,

    #[error("snapshot matrix is identically zero")]
    ZeroSnapshots,

    #[error("missing displacement for load {0}")]
    MissingDisplacement(usize),

    #[error("volume multiplier bisection did not converge (residual {residual:e})")]
    BisectionFailed { residual: f64 },

    #[error("eigen-solver did not converge in {0} iterations")]
    EigenNotConverged(usize),

    #[error("outer iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("parse error in {what}: {msg}")]
    Parse { what: String, msg: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        Error::Iteration {
            iteration,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
