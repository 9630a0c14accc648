use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Negative time requested on a flow whose base has no inverse.
    #[error("irreversible semiflow: cannot evolve by t = {t} without a base inverse")]
    IrreversibleSemiflow { t: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("sampler stalled after {attempts} proposals ({accepted} accepted): {detail}")]
    SamplerStalled {
        attempts: u64,
        accepted: u64,
        detail: String,
    },

    #[error("quadrature did not converge on fiber y = {y} over [{a}, {b}]")]
    Quadrature { y: f64, a: f64, b: f64 },

    #[error("domain error at (y = {y}, tau = {tau}): {detail}")]
    Domain { y: f64, tau: f64, detail: String },

    #[error("summation horizon exceeded: {crossings} roof crossings (cap {cap})")]
    Horizon { crossings: u64, cap: u64 },

    #[error("horizon exhausted: no level of the exceptional-set construction fits inside [0, {horizon})")]
    HorizonExhausted { horizon: f64 },

    #[error("exceptional set covers every sampled time up to {horizon}")]
    ExceptionalCoversHorizon { horizon: f64 },

    #[error("singular or ill-conditioned matrix: {0}")]
    Singular(String),

    #[error("not a symmetric positive-definite matrix: {0}")]
    NotPositiveDefinite(String),

    #[error("spectrum range exceeds float: partial log-spectrum {partial:?}")]
    SpectrumRange { partial: Vec<f64> },

    #[error("renormalization failure: {0}")]
    Renormalization(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for failures caused by bad input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::InvalidArgument(_) | Error::Unsupported(_) | Error::NotPositiveDefinite(_)
        )
    }
}
