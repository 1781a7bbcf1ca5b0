use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// The pair handed to a second-order routine is not in the graph of the
    /// normal cone of the PSD cone.
    #[error("pair is not in the graph of the normal cone (violation {violation:.3e})")]
    InvalidPair { violation: f64 },

    #[error("oracle did not converge after {iterations} iterations (gap bound {gap:.3e})")]
    OracleFailure { iterations: usize, gap: f64 },

    #[error("point is not a KKT point (residual {residual:.3e})")]
    NotKkt { residual: f64 },

    #[error("inner solver failed after {iterations} iterations (gradient norm {grad_norm:.3e})")]
    InnerFailure {
        best_x: Vec<f64>,
        grad_norm: f64,
        iterations: usize,
    },

    #[error("trace too short: {len} iterations, need at least {required}")]
    TooShortTrace { len: usize, required: usize },

    #[error("degenerate sampling: {0}")]
    DegenerateSampling(String),

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
