use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("weight exponent {0} outside (-1, -1/2] or integral")]
    InvalidWeight(f64),
    #[error("derivative order {0} not supported (k <= 2)")]
    InvalidOrder(usize),
    #[error("metric is not positive definite at grid node {0}")]
    DegenerateMetric(usize),
    #[error("lapse is not positive at grid node {0}")]
    NonPositiveLapse(usize),
    #[error("boundary data is not reflection symmetric: {reflection} moves it by {deviation:.3e}")]
    NotSymmetric { reflection: String, deviation: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("mass parameter {0} outside [-0.3, 0.3]")]
    MassOutOfRange(f64),
    #[error("least-squares residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    LeastSquares { residual: f64, tol: f64 },
    #[error("newton iteration did not converge after {iterations} steps (residual {residual:.3e})")]
    Diverged {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },
    #[error("shooting failed: {0}")]
    Shooting(String),
    #[error("mode (L={l}, M={m}) is outside the grid truncation")]
    ModeOutOfRange { l: usize, m: usize },
    #[error("mass extractions disagree: mode {mass:.6e}, flux {flux:.6e}")]
    MassExtraction { mass: f64, flux: f64 },
    #[error("null space not resolved: singular-value gap {gap:.3e} around the threshold")]
    Resolution { gap: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
