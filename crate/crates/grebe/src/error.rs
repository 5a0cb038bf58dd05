//! Error types shared across the crate.
//!
//! Every fallible operation returns [`Error`]. Errors carry a stable
//! [`Error::class`] tag (used by the CLI for machine-parsable output),
//! positional context where it exists (field path, byte offset), and the
//! causing error where there is one.

use std::io;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed bytes at a known position: bad magic, bad tag, garbage length.
    #[error("format error at byte {offset}: {reason}")]
    Format { offset: u64, reason: String },

    /// Input ended before a declared length was satisfied.
    #[error("truncated input: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },

    /// The file declares a format version this build does not understand.
    #[error("unsupported format version {found} (supported: {supported})")]
    Version { found: u16, supported: u16 },

    /// The file declares feature bits this build does not understand.
    #[error("unsupported feature flags {flags:#x}")]
    FeatureFlags { flags: u64 },

    /// Schema tree violates a structural rule.
    #[error("schema error: {0}")]
    Schema(String),

    /// On-disk type and in-memory type disagree for a field.
    #[error("type mismatch at `{path}`: expected {expected}, found {found}")]
    TypeMismatch {
        path: String,
        expected: String,
        found: String,
    },

    /// A value's shape does not match the field it is appended to.
    #[error("shape mismatch at `{path}`: {reason}")]
    Shape { path: String, reason: String },

    /// A value cannot be represented in the target physical type.
    #[error("element {index} out of range for {type_name}: {value}")]
    OutOfRange {
        index: usize,
        type_name: &'static str,
        value: String,
    },

    /// Index past the end of a column, entry range, or dataset.
    #[error("index {index} out of range (length {len})")]
    Bounds { index: u64, len: u64 },

    /// Stored data fails an integrity rule and cannot be trusted.
    #[error("data corruption: {context}")]
    Corruption {
        context: String,
        #[source]
        cause: Option<Box<Error>>,
    },

    /// Field path does not exist; carries near-miss candidates.
    #[error("unknown field `{path}`{}", format_candidates(.candidates))]
    UnknownField { path: String, candidates: Vec<String> },

    /// Inputs to a merge disagree structurally.
    #[error("merge error: schemas differ at `{path}`: {reason}")]
    Merge { path: String, reason: String },

    /// API misuse: double commit, write after commit, and similar.
    #[error("usage error: {0}")]
    Usage(String),

    /// Underlying device failure, tagged with the device offset when known.
    #[error("I/O error at offset {offset}")]
    Io {
        offset: u64,
        #[source]
        source: io::Error,
    },

    /// Operation requires a file layout the source does not have.
    #[error("unsupported mode: {0}")]
    UnsupportedMode(String),
}

fn format_candidates(candidates: &[String]) -> String {
    if candidates.is_empty() {
        String::new()
    } else {
        format!("; candidates: {}", candidates.join(", "))
    }
}

impl Error {
    /// Stable one-word class tag, the `error[<class>]:` prefix in CLI output.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Format { .. } => "format",
            Error::Truncated { .. } => "truncated",
            Error::Version { .. } => "version",
            Error::FeatureFlags { .. } => "version",
            Error::Schema(_) => "schema",
            Error::TypeMismatch { .. } => "type",
            Error::Shape { .. } => "type",
            Error::OutOfRange { .. } => "range",
            Error::Bounds { .. } => "bounds",
            Error::Corruption { .. } => "corruption",
            Error::UnknownField { .. } => "lookup",
            Error::Merge { .. } => "merge",
            Error::Usage(_) => "usage",
            Error::Io { .. } => "io",
            Error::UnsupportedMode(_) => "unsupported",
        }
    }

    pub(crate) fn io_at(offset: u64, source: io::Error) -> Self {
        Error::Io { offset, source }
    }

    pub(crate) fn corruption(context: impl Into<String>) -> Self {
        Error::Corruption {
            context: context.into(),
            cause: None,
        }
    }

    pub(crate) fn corruption_caused(context: impl Into<String>, cause: Error) -> Self {
        Error::Corruption {
            context: context.into(),
            cause: Some(Box::new(cause)),
        }
    }
}
