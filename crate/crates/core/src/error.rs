use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("size mismatch: expected {expected} values, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("alpha = {alpha} is outside the intercritical window for d = {dim}: {violated}")]
    OutsideIntercritical {
        dim: usize,
        alpha: f64,
        violated: String,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("no bounded trajectory found: {0}")]
    NoBoundedTrajectory(String),

    #[error("run horizon exceeded: requested t = {requested}, last snapshot at t = {horizon}")]
    HorizonExceeded { requested: f64, horizon: f64 },

    #[error("quadrature check failed: {0}")]
    Quadrature(String),

    #[error("configuration error:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("snapshot format error: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
