use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the generation pipeline or the metric suite.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("graph error: {0}")]
    Graph(String),

    #[error("degenerate edge {from} -> {to}: zero planar displacement")]
    DegenerateEdge { from: String, to: String },

    #[error("non-finite {what}: {value}")]
    NonFinite { what: &'static str, value: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("undefined cosine: zero-norm vector")]
    ZeroNorm,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("infinite loss: target probability is zero at step {step}")]
    InfiniteLoss { step: usize },

    #[error("provider `{provider}` request {id}: {message}")]
    Provider { provider: String, id: u64, message: String },

    #[error("provider `{provider}` unavailable: {message}")]
    ProviderStartup { provider: String, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("line {line}: {message}")]
    Record { line: usize, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json { context: context.into(), source }
    }

    /// True for failures caused by the environment (providers, files) rather
    /// than by data. The CLI maps these to exit code 2.
    pub fn is_environmental(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Provider { .. } | Error::ProviderStartup { .. })
    }
}

pub(crate) fn ensure_finite(what: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite { what, value })
    }
}
