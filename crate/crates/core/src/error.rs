use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = SrbError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SrbError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: missing required column `{column}`")]
    MissingColumn { path: String, column: String },

    #[error("{path}: line {line}: {message}")]
    Row {
        path: String,
        line: u64,
        message: String,
    },

    #[error("{path}: {message}")]
    Csv { path: String, message: String },

    #[error("invalid JSON in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("TFR series for region {region} has a gap at year {year}")]
    TfrGap { region: String, year: i32 },

    #[error("TFR series for region {region}: {message}")]
    TfrInvalid { region: String, message: String },

    #[error("no TFR series for region {0}")]
    MissingTfr(String),

    #[error("only {usable} usable cluster(s); merge the period further before computing a jackknife error")]
    TooFewClusters { usable: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite log-posterior at initialization: {term}")]
    NonFiniteInit { term: String },

    #[error("{0}")]
    Invalid(String),
}

impl SrbError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SrbError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        SrbError::Json {
            context: context.into(),
            source,
        }
    }
}
