use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} out of domain: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{what} did not converge after {terms} terms (estimated error {est_err:e})")]
    NonConvergence {
        what: &'static str,
        terms: usize,
        est_err: f64,
    },

    #[error("root bracket [{lo}, {hi}] does not straddle the target")]
    BracketFailure { lo: f64, hi: f64 },

    #[error("moment of order {nu} does not exist for shape {shape}")]
    DivergentMoment { nu: f64, shape: f64 },

    #[error("stochastic comparison needs a common shape, got {0} and {1}")]
    ShapeMismatch(f64, f64),

    #[error("degenerate sample: {0}")]
    DegenerateSample(&'static str),

    #[error("empty input")]
    EmptyInput,

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(what: &'static str, value: f64) -> Self {
        Error::Domain { what, value }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
