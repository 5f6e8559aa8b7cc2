use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix of size {rows}x{cols} is not square with even dimension")]
    OddDimension { rows: usize, cols: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("matrix is not symplectic (defect {defect:.3e})")]
    NotSymplectic { defect: f64 },

    #[error("symplectic matrix is not free: |det B| = {det:.3e}")]
    FreeConditionViolated { det: f64 },

    #[error("a path needs at least 2 points, got {0}")]
    TooFewPoints(usize),

    #[error("path leaves the manifold domain at parameter {0:?}")]
    PathLeavesDomain(Vec<f64>),

    #[error("winding vector has {got} entries but the manifold has {expected} periodic axes")]
    WindingMismatch { expected: usize, got: usize },

    #[error("nonzero windings on a manifold without periodic axes")]
    NonPeriodicWinding,

    #[error("projection to configuration space is singular at parameter {0:?}")]
    CausticAtPoint(Vec<f64>),

    #[error("non-transversal caustic crossing near parameter {0:?}")]
    NonGenericCaustic(Vec<f64>),

    #[error("implicit step failed to converge at t = {t}")]
    StepFailure { t: f64 },

    #[error("quadrature did not converge (last change {change:.3e})")]
    QuadratureNotConverged { change: f64 },

    #[error("shift {shift} is not a multiple of the grid step {step}")]
    OffGridShift { shift: f64, step: f64 },

    #[error("point {0:?} could not be lifted to the manifold")]
    LiftFailed(Vec<f64>),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
