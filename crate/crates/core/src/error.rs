use thiserror::Error;

/// Errors raised by the solvers and their plumbing.
#[derive(Debug, Error)]
pub enum PfnnError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular evaluation: {0}")]
    Singular(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("quadrature budget exhausted: estimate {estimate:e}, achieved tolerance {achieved:e}")]
    QuadratureBudget { estimate: f64, achieved: f64 },

    #[error("divergence detected after {iterations} iterations: {detail}")]
    Divergence { iterations: usize, detail: String },

    #[error("bound degenerate: {0}")]
    BoundDegenerate(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl PfnnError {
    /// Short machine-readable tag for error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            PfnnError::InvalidArgument(_) => "invalid_argument",
            PfnnError::Singular(_) => "singular",
            PfnnError::NonFinite(_) => "non_finite",
            PfnnError::QuadratureBudget { .. } => "quadrature_budget",
            PfnnError::Divergence { .. } => "divergence",
            PfnnError::BoundDegenerate(_) => "bound_degenerate",
            PfnnError::GridMismatch(_) => "grid_mismatch",
            PfnnError::LinearAlgebra(_) => "linear_algebra",
            PfnnError::Config(_) => "config",
            PfnnError::Io { .. } => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, PfnnError>;
