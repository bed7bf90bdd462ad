use thiserror::Error;

/// Errors raised by the solver, the forcing builder and the threshold calculators.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical blow-up at step {step} (t = {t}): max |coeff| = {max_coeff}")]
    BlowUp { step: u64, t: f64, max_coeff: f64 },

    #[error("{label} run: {source}")]
    Run {
        label: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn dimension(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    /// True if this error (or the one it wraps) is a numerical blow-up.
    pub fn is_blow_up(&self) -> bool {
        match self {
            Error::BlowUp { .. } => true,
            Error::Run { source, .. } => source.is_blow_up(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
