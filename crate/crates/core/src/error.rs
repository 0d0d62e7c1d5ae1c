use num_complex::Complex64;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("mode ({k}, {l}) exceeds band limit {band}")]
    BandLimit { k: i32, l: i32, band: u32 },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("fields live on different lattices")]
    LatticeMismatch,

    #[error("equation has no smooth periodic solution: mean of the right side is {mean}")]
    Unsolvable { mean: Complex64 },

    #[error("metric is not positive: g = {value} at ({x}, {y})")]
    Metric { x: f64, y: f64, value: f64 },

    #[error("reality violation: imaginary residue {residue:e}")]
    Reality { residue: f64 },

    #[error("obstruction at step n = {n}: mean of the right side is {value}")]
    Obstruction { n: usize, value: Complex64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("inconsistent candidate: {0}")]
    Inconsistent(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("shooting did not converge: {0}")]
    Shooting(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
