use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mixing covariance is singular after {attempts} draws (smallest eigenvalue {min_eigenvalue:e})")]
    SingularCovariance { attempts: usize, min_eigenvalue: f64 },

    #[error("weight vector must have unit norm, got {norm}")]
    NonUnitWeight { norm: f64 },

    #[error("enumeration of critical points is limited to n <= {max}, got {n}")]
    EnumerationBound { n: usize, max: usize },

    #[error("point is not critical: tangent gradient is {z_score:.1} standard errors from zero")]
    NotCritical { z_score: f64 },

    #[error("insufficient signal: {found} significant points, need {needed}")]
    InsufficientSignal { found: usize, needed: usize },

    #[error("insufficient data: {found} records, need {needed}")]
    InsufficientData { found: usize, needed: usize },

    #[error("gradient is statistically zero at d = {d}")]
    ZeroGradient { d: f64 },

    #[error("overlap {d} is outside the gradient-statistics grid [{lo}, {hi}]")]
    OutOfGrid { d: f64, lo: f64, hi: f64 },

    #[error("learning did not reach the target overlap within {max_steps} steps")]
    NotConverged { max_steps: u64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
