use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("empty sample set")]
    EmptySample,

    #[error("mean orientation undefined: resultant vector has zero length")]
    UndefinedMean,

    #[error("dispersion too high to estimate from {n} samples (log argument {arg})")]
    DispersionTooHigh { n: usize, arg: f64 },

    #[error("infinite concentration: mean resultant length is 1")]
    InfiniteConcentration,

    #[error("cannot fuse mixed dispersion kinds: {0} and {1}")]
    MixedDispersion(&'static str, &'static str),

    #[error("degenerate covariance: {0}")]
    DegenerateCovariance(&'static str),

    #[error("negative time step {0}")]
    NegativeTimeStep(f64),

    #[error("heading undefined for zero velocity")]
    UndefinedHeading,
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
