use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-summable spectrum: gamma = {0} must exceed 2")]
    NonSummable(f64),

    #[error("class-D violation: theta = {theta} must exceed 2 when nu * c = 0 (nu = {nu}, c = {c})")]
    ClassViolation { theta: f64, nu: f64, c: f64 },

    #[error("derivative singular at 0 for {0}")]
    SingularDerivative(String),

    #[error("grid bandlimit {grid} is insufficient for requested bandlimit {requested}")]
    Resolution { grid: usize, requested: usize },

    #[error("reality constraint violated: imaginary part {0:e} of an m = 0 coefficient")]
    Reality(f64),

    #[error("quadrature did not converge: estimated error {estimate:e} exceeds tolerance {tolerance:e}")]
    Quadrature { estimate: f64, tolerance: f64 },

    #[error("t = {t} too small for series: {required} Legendre terms needed (limit {limit})")]
    SeriesTooLong { t: f64, required: usize, limit: usize },

    #[error("times must be strictly increasing and positive")]
    NonMonotoneTimes,

    #[error("central-difference accuracy precondition violated: dt * max Psi^2 = {0} > 0.1")]
    Accuracy(f64),

    #[error("estimator requires distinct points (angular distance {0:e})")]
    CoincidentPoints(f64),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
