use thiserror::Error;

use crate::eigen::MinModeResult;

/// Errors raised across the saddle-search toolkit.
#[derive(Debug, Error)]
pub enum SaddleError {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown builtin potential `{0}`")]
    UnknownPotential(String),

    /// Coefficients violate the convexity condition sum(alpha + beta) > 1.
    #[error("coefficient sum {sum} violates the convexity condition α + β > 1")]
    CoefficientCondition { sum: f64 },

    #[error("directions are not orthonormal (deviation {deviation:.3e})")]
    NotOrthonormal { deviation: f64 },

    #[error("point is off the manifold by {residual:.3e}")]
    OffManifold { residual: f64 },

    #[error("constraint gradients are rank deficient at the given point")]
    RankDeficient,

    #[error("requested {requested} eigenpairs but only {available} are available")]
    TooManyModes { requested: usize, available: usize },

    #[error("eigensolver did not converge after {iterations} iterations (max residual {residual:.3e})")]
    EigenNotConverged {
        iterations: usize,
        residual: f64,
        best: Box<MinModeResult>,
    },

    #[error("dimension {dim} exceeds the dense cap {cap}")]
    DenseCapExceeded { dim: usize, cap: usize },

    #[error("subproblem is unbounded: smallest eigenvalue {lambda:.3e} > 0 and no trust box configured")]
    UnboundedSubproblem { lambda: f64 },

    #[error("inner minimizer diverged after {iterations} iterations: {reason}")]
    InnerDivergence { iterations: usize, reason: String },

    #[error("retraction failed: {0}")]
    Retraction(String),

    #[error("singular Hessian in Newton iteration")]
    SingularHessian,

    #[error("order estimate needs at least {needed} usable errors, found {found}")]
    InsufficientData { needed: usize, found: usize },

    #[error("outer iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<SaddleError>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SaddleError>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(SaddleError::DimensionMismatch { expected, found })
    }
}
