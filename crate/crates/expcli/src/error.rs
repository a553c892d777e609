use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum ExpError {
    #[error("invalid config: `{field}` {reason}")]
    Config { field: String, reason: String },
    #[error("cannot parse {path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("plot: {0}")]
    Plot(String),
    #[error(transparent)]
    Sim(#[from] pima::Error),
}

impl ExpError {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ExpError::Config { field: field.into(), reason: reason.into() }
    }

    /// Whether the error is the user's configuration rather than a failure
    /// during the run.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            ExpError::Config { .. }
                | ExpError::Parse { .. }
                | ExpError::Sim(pima::Error::InvalidConfig { .. })
        )
    }
}

pub type ExpResult<T> = std::result::Result<T, ExpError>;
