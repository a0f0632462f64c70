use thiserror::Error;
use ttiga_tensor::TtError;

#[derive(Debug, Error)]
pub enum IgaError {
    #[error("parameter {xi} outside the knot range [{lo}, {hi}]")]
    Domain { xi: f64, lo: f64, hi: f64 },

    #[error("invalid knot vector: {0}")]
    KnotVector(String),

    #[error("refinement error: {0}")]
    Refinement(String),

    #[error("geometry construction failed: {0}")]
    Construction(String),

    #[error("singular geometry map at xi = {xi:?} (det = {det:e})")]
    SingularMap { xi: [f64; 3], det: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("system has no Dirichlet face and is singular")]
    SingularSystem,

    #[error("full-grid oracle refused: {dofs} dofs exceeds the limit of {limit}")]
    OracleRefused { dofs: usize, limit: usize },

    #[error("error norm undefined: integral of the analytic solution is zero")]
    UndefinedNorm,

    #[error(transparent)]
    Tensor(#[from] TtError),
}

pub type Result<T> = std::result::Result<T, IgaError>;
