use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid bounds: lo={lo} must be below hi={hi}")]
    InvalidBounds { lo: f64, hi: f64 },

    #[error("invalid parameter {name}={value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("argument {value} outside domain {domain}")]
    OutOfDomain { value: f64, domain: String },

    #[error("hitting time undefined: h(0)={0} is not positive")]
    NoPositiveStart(f64),

    #[error("root finding failed: {0}")]
    RootFinding(String),

    #[error("quadrature failed on [{lo}, {hi}]: {reason}")]
    Quadrature { lo: f64, hi: f64, reason: String },

    #[error("singular covariance matrix (determinant {0})")]
    SingularCovariance(f64),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("insufficient replications: need at least {needed}, got {got}")]
    InsufficientReplications { needed: usize, got: usize },

    #[error("map is not monotone: {0}")]
    NonMonotone(String),

    #[error("replication {index}: {source}")]
    Replication {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than numerical breakdown.
    pub fn is_config_error(&self) -> bool {
        match self {
            Error::InvalidBounds { .. }
            | Error::InvalidParameter { .. }
            | Error::EmptyInput(_)
            | Error::Config(_)
            | Error::Json(_)
            | Error::NonMonotone(_)
            | Error::InsufficientReplications { .. } => true,
            Error::Replication { source, .. } => source.is_config_error(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
