use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not symplectic (defect {defect:.3e} > tol {tol:.3e})")]
    NotSymplectic { defect: f64, tol: f64 },

    #[error("coefficient not symmetric at t = {t}: asymmetry {asym:.3e}")]
    NonSymmetric { t: f64, asym: f64 },

    #[error("coefficient violates reversibility at t = {t}: defect {defect:.3e}")]
    NotReversible { t: f64, defect: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unresolved crossing near t = {t}: {reason}")]
    UnresolvedCrossing { t: f64, reason: String },

    #[error("phase refinement budget exhausted (max phase step {max_step:.3e})")]
    RefinementBudget { max_step: f64 },

    #[error("basepath end does not match path start (gap {gap:.3e})")]
    MismatchedJunction { gap: f64 },

    #[error("degenerate operator: |det(exp(K tau J) - M)| = {margin:.3e}")]
    DegenerateSpec { margin: f64 },

    #[error("shift not admissible: {0}")]
    InadmissibleShift(String),

    #[error("indefinite matrix where a definite one is required (min {min:.3e}, max {max:.3e})")]
    Indefinite { min: f64, max: f64 },

    #[error("iteration cap reached after {iterations} iterations (residual {residual:.3e})")]
    IterationCap { iterations: usize, residual: f64 },

    #[error("flow blow-up at t = {t} (norm {norm:.3e})")]
    BlowUp { t: f64, norm: f64 },

    #[error("family flag check failed: {0}")]
    FlagViolation(String),

    #[error("grid too coarse: nullity is positive at the grid endpoint λ = {lambda}")]
    CoarseGrid { lambda: f64 },

    #[error("singular linear system: {0}")]
    Singular(String),
}

pub type Result<T> = std::result::Result<T, Error>;
