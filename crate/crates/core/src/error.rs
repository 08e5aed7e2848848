use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("covariance factorization failed: {0}")]
    Factorization(String),

    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("curve kind mismatch: {0} vs {1}")]
    KindMismatch(String, String),

    #[error("simulation failed for theta_c={theta_c:?} theta_b={theta_b:?}: {source}")]
    Simulation {
        theta_c: Vec<f64>,
        theta_b: Vec<bool>,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("data: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
