use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degree law has zero mean; size-biased law undefined")]
    ZeroMean,
    #[error("invalid degree law: {0}")]
    InvalidLaw(String),
    #[error("edge probability {0} is outside [0, 1]")]
    InvalidProbability(f64),
    #[error("instance has {n} vertices; exact enumeration is capped at {max}")]
    TooLarge { n: usize, max: usize },
    #[error("sampled tree exceeded {cap} vertices")]
    SizeExplosion { cap: usize },
    #[error("pool sizes differ: {0} vs {1}")]
    SizeMismatch(usize, usize),
    #[error("finite-difference step {step} is dominated by Monte Carlo noise (stderr/step = {ratio})")]
    StepTooSmall { step: f64, ratio: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
