use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DaisError {
    #[error("invalid interval: lower bound {lo} must be strictly below upper bound {hi}")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("received signal has zero energy")]
    DegenerateSignal,

    #[error("noise standard deviation must be positive, got {0}")]
    InvalidNoise(f64),

    #[error("nuisance block of the Fisher information is singular (condition number {condition:e})")]
    SingularNuisance { condition: f64 },

    #[error("information matrix is singular (condition number {condition:e})")]
    SingularInformation { condition: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("lines of bearing are parallel; no intersection")]
    NoIntersection,

    #[error("no data to plot")]
    NoData,

    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for DaisError {
    fn from(err: std::io::Error) -> Self {
        DaisError::Io(err.to_string())
    }
}

impl From<csv::Error> for DaisError {
    fn from(err: csv::Error) -> Self {
        DaisError::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, DaisError>;
