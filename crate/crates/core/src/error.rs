use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("channel matrix is ill-conditioned (cond = {cond:.3e})")]
    SingularChannel { cond: f64 },
    #[error("loop is outside its stability region (K*A*T = {kat})")]
    StabilityViolation { kat: f64 },
    #[error("no root of the gain equation lies in (0, 2)")]
    NoRootInRange,
    #[error("index out of range: antenna {antenna}, satellite {satellite}, sample {sample}")]
    IndexOutOfRange {
        antenna: usize,
        satellite: usize,
        sample: usize,
    },
    #[error("no samples with every satellite above the horizon")]
    NoVisibleSamples,
    #[error("value overflows f64: {0}")]
    Overflow(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}
