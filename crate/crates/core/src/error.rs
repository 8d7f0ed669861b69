use thiserror::Error;

/// Errors raised by the numeric modules.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("convergence error: {0}")]
    Convergence(String),

    #[error("series diverges: {0}")]
    Divergence(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("derivative of order {order} unavailable for {phi}")]
    UnsupportedOrder { order: usize, phi: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("mismatch: {0}")]
    Mismatch(String),

    #[error("cannot parse {0}")]
    Parse(String),
}

impl Error {
    /// Short machine-readable tag, used by the CLI's structured error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Convergence(_) => "convergence",
            Error::Divergence(_) => "divergence",
            Error::Resource(_) => "resource",
            Error::Precondition(_) => "precondition",
            Error::UnsupportedOrder { .. } => "unsupported_order",
            Error::Config(_) => "config",
            Error::Mismatch(_) => "mismatch",
            Error::Parse(_) => "parse",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
