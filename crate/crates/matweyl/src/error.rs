use thiserror::Error;

/// Errors surfaced by the solver kernels and reconstruction pipelines.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("eigensolver failed to converge within {sweeps} sweeps (n = {n})")]
    NonConvergence { n: usize, sweeps: usize },

    #[error("matrix is singular or ill-conditioned: {detail}")]
    SingularMatrix { detail: String },

    #[error("spectra of A and B overlap (min separation {separation:.3e}, needed {needed:.3e})")]
    SpectraOverlap { separation: f64, needed: f64 },

    #[error("an eigenvalue lies within {dist:.3e} of the contour (radius {radius:.3e})")]
    SpectraOnContour { dist: f64, radius: f64 },

    #[error("winding-number precondition failed: {detail}")]
    SpectraMisplaced { detail: String },

    #[error("accretivity precondition failed: {detail}")]
    NotAccretive { detail: String },

    #[error("contraction gate violated: {detail}")]
    ContractionViolated { detail: String },

    #[error("residual {residual:.3e} above tolerance {tol:.3e} after {iters} iterations")]
    IterationBudgetExceeded {
        residual: f64,
        tol: f64,
        iters: usize,
    },

    #[error("supplied matrix is not a solution (residual {residual:.3e})")]
    NotASolution { residual: f64 },

    #[error("spectral parameter lies on the real axis")]
    RealAxis,

    #[error("sample moduli span {span:.2} decades, need at least {needed:.2}")]
    InsufficientDecades { span: f64, needed: f64 },

    #[error("estimate is not positive definite (min eigenvalue {min_eig:.3e})")]
    NotPositiveDefinite { min_eig: f64 },

    #[error("degenerate measure: Gram block singular at degree {degree} (min eigenvalue {min_eig:.3e})")]
    DegenerateMeasure { degree: usize, min_eig: f64 },

    #[error("fewer than 2 coefficients recoverable from the supplied samples")]
    WindowTooSmall,

    #[error("no decay detected in the data differences (fitted slope {slope:.2})")]
    NoDecay { slope: f64 },

    #[error("ODE step control failed at x = {x:.6}: {detail}")]
    StepFailure { x: f64, detail: String },

    #[error("spectrum separation could not be certified: {detail}")]
    SeparationFailed { detail: String },

    #[error("independent solution routes disagree (gap {gap:.3e}, tolerance {tol:.3e})")]
    RouteMismatch { gap: f64, tol: f64 },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn singular(detail: impl Into<String>) -> Self {
        Error::SingularMatrix {
            detail: detail.into(),
        }
    }

    pub fn validation(detail: impl Into<String>) -> Self {
        Error::Validation(detail.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
