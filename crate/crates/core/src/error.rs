use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Malformed graph text; `token` is the offending piece of input.
    #[error("cannot parse `{token}`: {reason}")]
    Parse { token: String, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    /// A size or enumeration cap was exceeded.
    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A block construction produced weights outside `[0, 1]` or impossible block sizes.
    #[error("construction infeasible: {0}")]
    Construction(String),

    #[error("no feasible point found within budget; best residuals {residuals:?}")]
    Infeasible { residuals: Vec<f64> },

    #[error("sampling failed: {0}")]
    Sampling(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn parse(token: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Parse {
            token: token.into(),
            reason: reason.into(),
        }
    }
}
