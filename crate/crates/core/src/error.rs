use std::path::PathBuf;

/// Errors raised anywhere in the toolkit.
///
/// Variants are grouped by the stage that produces them so that callers (the
/// CLI in particular) can report which part of the pipeline failed.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("row {row}: {message}")]
    RowParse { row: usize, message: String },

    #[error("post {post_id}: {message}")]
    Validation { post_id: String, message: String },

    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("integrity check failed: {0}")]
    Integrity(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("language model unavailable: {0}")]
    Environment(String),

    #[error("model construction failed at layer `{layer}`: {message}")]
    Construction { layer: String, message: String },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Divergence { epoch: usize, batch: usize, loss: f64 },

    #[error("prediction/gold alignment failed: missing ids {missing:?}, unexpected ids {extra:?}")]
    Alignment { missing: Vec<String>, extra: Vec<String> },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
