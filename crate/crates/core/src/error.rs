use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Invalid argument or configuration value.
    #[error("{0}")]
    Config(String),

    #[error("preprocessing: {0}")]
    Preprocess(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite state in trajectory {trajectory} at step {step} (t = {t})")]
    Integration { step: usize, t: f64, trajectory: usize },

    #[error("non-finite loss at epoch {epoch}")]
    Training { epoch: usize },

    #[error("comparison: {0}")]
    Comparison(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    /// True for errors caused by bad input rather than numerical breakdown.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Integration { .. } | Error::Training { .. })
    }
}
