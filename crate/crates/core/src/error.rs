use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("negative time {0}")]
    NegativeTime(f64),

    #[error("weight exponent kappa={kappa} is inadmissible: need |kappa| < 2*lambda0 = {limit}")]
    InadmissibleWeight { kappa: f64, limit: f64 },

    #[error("grid too small: need at least {needed} nodes, got {got}")]
    GridTooSmall { needed: usize, got: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("relative residual {residual:e} exceeds {threshold:e}")]
    ResidualTooLarge { residual: f64, threshold: f64 },

    #[error("Neumann iteration diverged after {iterations} iterations (contraction sum q={q})")]
    NotContractive { iterations: usize, q: f64 },

    #[error("boundary condition u(0)=0 violated: |u(0)|={value:e}")]
    BoundaryConditionViolated { value: f64 },

    #[error("function is not in the domain: trace norm {trace:e} at order {order}")]
    NotInDomain { order: usize, trace: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
