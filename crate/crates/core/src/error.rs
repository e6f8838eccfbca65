use thiserror::Error;

/// Errors raised by the beam construction and verification pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CgoError {
    #[error("coefficient matrix is not Hermitian (relative deviation {deviation:.3e})")]
    NonHermitian { deviation: f64 },
    #[error("eigenvalue gap {gap:.3e} below the separation threshold at xi = {xi:?}")]
    GapCollapse { gap: f64, xi: Vec<f64> },
    #[error("mode index {mode} out of range ({count} distinct eigenvalues)")]
    ModeIndex { mode: usize, count: usize },
    #[error("resolvent is singular on the quadrature contour")]
    SingularResolvent,
    #[error("ray left the admissible region at t = {t:.4}, x = {x:?}")]
    DomainExit { t: f64, x: Vec<f64> },
    #[error("reference manifold is no longer embedded at t = {t:.4}: {detail}")]
    EmbeddingFailure { t: f64, detail: String },
    #[error("normal frame lost orthonormality (deviation {deviation:.3e})")]
    FrameDrift { deviation: f64 },
    #[error("point lies outside the beam chart: {detail}")]
    OutOfChart { detail: String },
    #[error("chart Jacobian is singular (condition number {cond:.3e})")]
    SingularJacobian { cond: f64 },
    #[error("imaginary part of the phase Hessian lost positivity at t = {t:.4} (min eigenvalue {min_eig:.3e})")]
    PositivityLoss { t: f64, min_eig: f64 },
    #[error("phase Hessian blew up at t = {t:.4}")]
    BlowUp { t: f64 },
    #[error("amplitude left the polarization space (violation {violation:.3e})")]
    PolarizationDrift { violation: f64 },
    #[error("no positive separation bound from competing mode {mode}")]
    SeparationFailure { mode: usize },
    #[error("grid node at {x:?} is claimed by components {first} and {second}")]
    TubeOverlap { x: Vec<f64>, first: usize, second: usize },
    #[error("time step {dt:.3e} violates the CFL limit {limit:.3e}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("grid spacing {dx:.3e} does not resolve the oscillation (need <= {required:.3e})")]
    ResolutionError { dx: f64, required: f64 },
    #[error("field grids do not match: {detail}")]
    GridMismatch { detail: String },
    #[error("rate fit is degenerate: {detail}")]
    DegenerateFit { detail: String },
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cannot write output: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, CgoError>;

impl CgoError {
    /// Errors caused by the input description rather than by the numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, CgoError::Config(_) | CgoError::Io(_) | CgoError::Unsupported(_) | CgoError::ModeIndex { .. })
    }
}
