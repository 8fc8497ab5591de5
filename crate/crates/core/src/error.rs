use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A modelling hypothesis (A1)-(A3) or the truncation range is violated.
    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:e})")]
    CgNotConverged { iterations: usize, residual: f64 },

    #[error("operator is not positive definite (curvature {0:e})")]
    NotPositiveDefinite(f64),

    #[error("semismooth Newton stagnated after {iterations} iterations (residual {residual:e})")]
    NewtonStagnation { iterations: usize, residual: f64 },

    #[error("time step rejected below minimum step {tau_min:e} at t = {t}: {source}")]
    StepRejected {
        t: f64,
        tau_min: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("snapshot format error: {0}")]
    Snapshot(String),

    #[error("output format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(e.to_string())
    }
}
