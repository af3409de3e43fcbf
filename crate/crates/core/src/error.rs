use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid value for `{field}`: {reason}")]
    Invalid { field: String, reason: String },

    #[error("unknown scheduler `{0}` (expected one of: payda, edf, mt, pf, rr)")]
    UnknownScheduler(String),

    #[error("{path}: {message}")]
    ScenarioFile { path: PathBuf, message: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Usage errors map to exit code 2, everything else to 1.
    pub fn is_usage(&self) -> bool {
        !matches!(self, Error::Io { .. })
    }
}
