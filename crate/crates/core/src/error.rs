use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("invalid terminal law: {0}")]
    InvalidLaw(String),

    #[error("invalid garbling policy: {0}")]
    InvalidGarbling(String),

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error("invalid interval: {0}")]
    InvalidInterval(String),

    /// The requested quantity is infinite, e.g. an exit time from an
    /// interval touching an absorbing belief.
    #[error("divergent: {0}")]
    Divergent(String),

    #[error("{censored} of {n_paths} paths censored at the natural-clock cap (limit 1%)")]
    Censored { censored: usize, n_paths: usize },

    #[error("invalid cost model: {0}")]
    InvalidCost(String),

    #[error("empty sample set")]
    EmptySamples,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
