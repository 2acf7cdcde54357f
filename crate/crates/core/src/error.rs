use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is singular (pivot {pivot:e} at column {column})")]
    SingularMatrix { column: usize, pivot: f64 },

    #[error("jacobian is rank deficient (smallest gram eigenvalue {smallest:e})")]
    RankDeficient { smallest: f64 },

    #[error("spectrum has a complex pair {re} ± {im}i")]
    ComplexSpectrum { re: f64, im: f64 },

    #[error("iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("newton step failed: singular jacobian")]
    SingularJacobian,

    #[error("degenerate configuration: spring length vanishes at q = {q}")]
    DegenerateConfiguration { q: f64 },

    #[error("target deflection ({dx}, {dy}) is outside the manipulator workspace")]
    Unreachable { dx: f64, dy: f64 },

    #[error("no equilibrium found for deflection ({dx}, {dy})")]
    NoEquilibriumFound { dx: f64, dy: f64 },

    #[error("degenerate critical point: projected hessian eigenvalue {eigenvalue:e} is within tolerance of zero")]
    Indeterminate { eigenvalue: f64 },

    #[error("border matrix B could not be factorized")]
    SingularB,

    #[error("expected {expected} nonzero eigenvalues, found {found}")]
    SpectrumCountMismatch { expected: usize, found: usize },

    #[error("mode produces no axial deflection (mu_x = {mu_x:e})")]
    DegenerateMode { mu_x: f64 },

    #[error("operation requires symmetric spring controls (k1 = k2, L1_0 = L2_0)")]
    AsymmetricSprings,
}
