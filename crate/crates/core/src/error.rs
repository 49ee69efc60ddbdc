use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
///
/// Messages are prefixed with the subsystem that raised them so the CLI can
/// surface them verbatim.
#[derive(Debug, Error)]
pub enum Error {
    #[error("tensor: shape error: {0}")]
    Shape(String),

    #[error("tensor: non-finite value produced by {op}")]
    NonFinite { op: &'static str },

    #[error("model-io: malformed container header: {0}")]
    Header(String),

    #[error("model-io: tensor '{name}' byte range {begin}..{end} is out of bounds (payload is {len} bytes)")]
    Bounds {
        name: String,
        begin: usize,
        end: usize,
        len: usize,
    },

    #[error("model-io: tensor '{name}' has unsupported dtype '{dtype}' (only F32 is supported)")]
    Dtype { name: String, dtype: String },

    #[error("model-io: manifest references missing tensor '{0}'")]
    DanglingName(String),

    #[error("model-io: layer chain mismatch at layer {layer}: {reason}")]
    ShapeChain { layer: usize, reason: String },

    #[error("model-io: unsupported op '{op}' at layer {layer}")]
    UnsupportedOp { layer: usize, op: String },

    #[error("model-io: malformed manifest: {0}")]
    Manifest(String),

    #[error("inference: unknown tap '{tap}'; available taps: {}", available.join(", "))]
    UnknownTap { tap: String, available: Vec<String> },

    #[error("inference: {0}")]
    Input(String),

    #[error("stimuli: {0}")]
    Stimulus(String),

    #[error("perception: {0}")]
    Perception(String),

    #[error("perception: degenerate layer '{layer}': {reason}")]
    DegenerateLayer { layer: String, reason: String },

    #[error("distance: {0}")]
    Distance(String),

    #[error("eval: {0}")]
    Eval(String),

    #[error("eval: correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("eval: logistic fit did not converge after {iterations} iterations")]
    FitNotConverged { iterations: usize },

    #[error("eval: cannot decode image {path}: {reason}")]
    Decode { path: PathBuf, reason: String },

    #[error("eval: empty input: {0}")]
    EmptyInput(String),

    #[error("io: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerical pipeline itself, as opposed to bad
    /// user input or configuration.
    pub fn is_numeric_failure(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. }
                | Error::DegenerateLayer { .. }
                | Error::UndefinedCorrelation(_)
                | Error::FitNotConverged { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
