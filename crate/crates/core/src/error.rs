use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A state left the region where the model (or one of its closed forms) is defined.
    #[error("domain error in {model}: {reason}")]
    Domain { model: String, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("argument error: {0}")]
    Argument(String),

    /// A closed-form subflow could not be evaluated (branch exit or blow-up).
    #[error("integration error in flow {flow}, coordinate {coordinate}: {reason}")]
    Integration {
        flow: String,
        coordinate: usize,
        reason: String,
    },

    #[error("step {step}: {source}")]
    AtStep { step: usize, source: Box<Error> },

    #[error("diagnostic error: {0}")]
    Diagnostic(String),

    /// Reading or writing outside the numerics (CSV, reports).
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(model: &str, reason: impl Into<String>) -> Self {
        Error::Domain {
            model: model.to_string(),
            reason: reason.into(),
        }
    }

    pub(crate) fn at_step(self, step: usize) -> Self {
        Error::AtStep {
            step,
            source: Box::new(self),
        }
    }

    /// Strips any step wrapper.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtStep { source, .. } => source.root(),
            e => e,
        }
    }
}
