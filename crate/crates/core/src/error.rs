use thiserror::Error;

/// Errors raised across the simulation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("invalid stabilizer code: {0}")]
    Construction(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("degenerate gap: {0}")]
    DegenerateGap(String),

    #[error("level crossing at t = {t}: gap {gap:e}")]
    LevelCrossing { t: f64, gap: f64 },

    #[error("invalid bath model: {0}")]
    Model(String),

    #[error("step size underflow at t = {t} (h = {step:e}); smallest gap {min_gap:e}, largest rate {max_rate:e}")]
    Stiffness {
        t: f64,
        step: f64,
        min_gap: f64,
        max_rate: f64,
    },

    #[error("integration quality: {0}")]
    IntegrationQuality(String),

    #[error("degenerate fit: {0}")]
    FitDegenerate(String),

    #[error("config error in `{key}`: {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
