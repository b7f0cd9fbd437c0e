use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid interaction: {0}")]
    InvalidInteraction(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("operation requires {expected}, got {found}")]
    WrongVariant {
        expected: &'static str,
        found: &'static str,
    },

    #[error("problem too large: {what} = {size} exceeds limit {limit}")]
    TooLarge {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    #[error("truncation half-width {half_width} too small: boundary-node mass {mass:e} at site {site}")]
    TruncationTooSmall {
        half_width: f64,
        site: usize,
        mass: f64,
    },

    #[error("linear solve failed: {0}")]
    Solver(String),

    #[error("envelope construction failed at site {site}: {reason}")]
    Envelope { site: usize, reason: String },

    #[error("non-finite energy at site {site} during sweep {sweep}")]
    NonFiniteEnergy { site: usize, sweep: usize },

    #[error("series is constant; autocorrelation time undefined")]
    ConstantSeries,

    #[error("series of length {len} too short for integrated autocorrelation time {tau:.2} (need >= 100 tau)")]
    SeriesTooShort { len: usize, tau: f64 },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("time step too large: estimates at dt and dt/2 differ by {relative_drift:.3} (relative)")]
    TimeStepTooLarge { relative_drift: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
