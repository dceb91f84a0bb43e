use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid rate: {name} = {value}")]
    InvalidRate { name: &'static str, value: f64 },

    #[error("non-finite parameter: {0}")]
    NonFinite(String),

    #[error("level index {0} out of range (expected 0..=4)")]
    LevelIndex(usize),

    #[error("inconsistent parameters: {0}")]
    Inconsistent(String),

    #[error("invalid pulse: {0}")]
    InvalidPulse(String),

    #[error("spectral grid too coarse: {0}")]
    SpectralGridTooCoarse(String),

    #[error("spectral grid coverage: tails carry {0:.3e} of the weight")]
    GridCoverage(f64),

    #[error("integrator unstable at t = {t}: trace drift {drift:.3e}, reduce dt")]
    Unstable { t: f64, drift: f64 },

    #[error("principal value not converged (last change {0:.3e})")]
    PrincipalValue(f64),

    #[error("internal consistency: {0}")]
    Consistency(String),

    #[error("non-finite result in {0}")]
    Overflow(&'static str),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("{0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
