use thiserror::Error;

/// Errors shared by all modules of the crate.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("eigensolver failed to converge: {0}")]
    ConvergenceFailure(String),

    #[error(
        "ambiguous kernel: eigenvalue {eigenvalue:.3e} lies between zero_tol {zero_tol:.3e} \
         and 10*zero_tol"
    )]
    AmbiguousKernel { eigenvalue: f64, zero_tol: f64 },

    #[error("spectral gap {gap:.3e} below usable floor {floor:.3e}")]
    GapClosed { gap: f64, floor: f64 },

    #[error("zero-mode product sequence grows; no normalizable kernel vector")]
    NotNormalizable,

    #[error("near-singular solve: pivot magnitude {pivot:.3e} below {floor:.3e}")]
    NearSingular { pivot: f64, floor: f64 },

    #[error("quadrature not converged: doubling nodes changed result by {change:.3e} > {tol:.3e}")]
    QuadratureNotConverged { change: f64, tol: f64 },

    #[error("perturbation sup-norm {norm:.3e} exceeds contour guard eta {eta:.3e}")]
    PerturbationTooLarge { norm: f64, eta: f64 },

    #[error("Taylor remainder below noise floor for all scales; exponent fit is degenerate")]
    DegenerateFit,

    #[error("decay tail has {got} usable samples, need at least {needed}")]
    InsufficientTail { needed: usize, got: usize },

    #[error("fitted decay rate {alpha:.3e} is not positive")]
    NonDecaying { alpha: f64 },

    #[error("solver did not converge: residual {residual:.3e} after {iterations} iterations")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("positivity floor active at convergence: t_{index} clamped at {floor:.3e}")]
    PositivityViolated { index: usize, floor: f64 },

    #[error("perturbation support too wide: {0}")]
    SupportTooWide(String),

    #[error("inconsistent zero-mode occupation: {0}")]
    GapUsageError(String),
}
