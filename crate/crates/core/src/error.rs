use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("input too short: {0}")]
    InputTooShort(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("streams misaligned: {features} feature frames vs {targets} target frames")]
    Misalignment { features: usize, targets: usize },

    #[error("bad magic in {path}: expected {expected:?}, found {found:?}")]
    BadMagic {
        path: PathBuf,
        expected: [u8; 4],
        found: [u8; 4],
    },

    #[error("unsupported format version {found} in {path} (expected {expected})")]
    Version {
        path: PathBuf,
        expected: u32,
        found: u32,
    },

    #[error("truncated file {path}: {detail}")]
    Truncated { path: PathBuf, detail: String },

    #[error("feature {name:?} declares dim {found}, registry says {expected}")]
    RegistryConflict {
        name: String,
        expected: usize,
        found: usize,
    },

    #[error("unknown feature {0:?} (no registry entry and no explicit dim)")]
    UnknownFeature(String),

    #[error("conflict: {0}")]
    Conflict(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("degenerate batch: mask selects no frames")]
    DegenerateBatch,

    #[error("empty report: no test utterances")]
    EmptyReport,

    #[error("malformed data in {path}: {detail}")]
    Format { path: PathBuf, detail: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension {
            op,
            detail: detail.into(),
        }
    }

    /// I/O failure tagged with the path involved.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by bad input data or file contents.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Dimension { .. }
                | Error::InputTooShort(_)
                | Error::Misalignment { .. }
                | Error::BadMagic { .. }
                | Error::Version { .. }
                | Error::Truncated { .. }
                | Error::RegistryConflict { .. }
                | Error::UnknownFeature(_)
                | Error::Conflict(_)
                | Error::DegenerateBatch
                | Error::EmptyReport
                | Error::Format { .. }
                | Error::Io { .. }
        )
    }
}
