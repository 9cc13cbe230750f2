use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network widths: entry {index} is {value} ({reason})")]
    InvalidWidths {
        index: usize,
        value: usize,
        reason: &'static str,
    },
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid box bounds: lower {lower} must be below upper {upper}")]
    InvalidBounds { lower: f64, upper: f64 },
    #[error("empty {0} sample set")]
    EmptySampleSet(&'static str),
    #[error("unknown problem `{name}`; available: {available}")]
    UnknownProblem { name: String, available: String },
    #[error(
        "closure `{0}` has no analytic Laplacian; enable the finite-difference fallback to proceed"
    )]
    MissingLaplacian(&'static str),
    #[error("non-finite value encountered at iteration {iteration}: {what}")]
    NonFinite { iteration: usize, what: &'static str },
    #[error("zero reference norm in relative error")]
    ZeroReference,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
