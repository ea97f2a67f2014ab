use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.
///
/// Variants are grouped by contract family rather than by module so that
/// callers (in particular the CLI) can map them onto stable exit codes.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates its documented bounds.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// A binary container or manifest failed to parse. `field` names the
    /// offending header field or section.
    #[error("format error in {field}: {message}")]
    Format { field: String, message: String },

    /// Underlying I/O failure, annotated with the path involved.
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Traversals that must be index-aligned disagree in length.
    #[error("alignment error: {0}")]
    Alignment(String),

    /// A vector or matrix argument has the wrong dimensions.
    #[error("shape error: {0}")]
    Shape(String),

    /// Requested more components than the data can support.
    #[error("rank error: {0}")]
    Rank(String),

    /// The fitting data carries no variance to decompose.
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// An index argument is outside its valid range.
    #[error("bounds error: {0}")]
    Bounds(String),

    /// A caller violated an API precondition (e.g. stepping a finished episode).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A computation produced a non-finite number.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A CSV or log row set does not match the expected schema.
    #[error("schema error: missing columns {missing:?}")]
    Schema { missing: Vec<String> },

    /// An evaluation curve was requested from empty inputs.
    #[error("empty curve: {0}")]
    EmptyCurve(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(field: &str, message: impl Into<String>) -> Self {
        Error::Format { field: field.to_string(), message: message.into() }
    }
}
