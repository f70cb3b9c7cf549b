//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty shard: at least one sample is required")]
    EmptyShard,

    #[error("invalid {what}: {why}")]
    InvalidParameter { what: &'static str, why: String },

    #[error("invalid label {label}: {why}")]
    InvalidLabel { label: f64, why: &'static str },

    #[error("operator maps the start vector to zero; Rayleigh quotient undefined")]
    ZeroOperator,

    #[error("Richardson iteration diverged at round {round}")]
    RichardsonDiverged { round: usize },

    #[error("worker {worker} diverged: {source}")]
    WorkerDiverged {
        worker: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("model update produced non-finite parameters at round {round}")]
    NonFiniteUpdate { round: usize },

    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("label partition infeasible: {deficits}")]
    PartitionDeficit { deficits: String },

    #[error("bad IDX data in {path} at byte {offset}: {why}")]
    IdxFormat {
        path: String,
        offset: u64,
        why: String,
    },

    #[error("bad LIBSVM data in {path} at line {line}: {why}")]
    LibsvmFormat {
        path: String,
        line: usize,
        why: String,
    },

    #[error("bad shard file {path}: {why}")]
    ShardFormat { path: String, why: String },

    #[error("bad trace file {path}: {why}")]
    TraceFormat { path: String, why: String },

    #[error("trace has no accuracy column content: regression runs record validation loss")]
    NoAccuracy,

    #[error("invalid configuration:\n{}", issues.join("\n"))]
    Config { issues: Vec<String> },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(what: &'static str, why: impl Into<String>) -> Self {
        Error::InvalidParameter {
            what,
            why: why.into(),
        }
    }

    /// True for the failure modes that a run records as a diverged round
    /// rather than propagating as a hard error.
    pub fn is_divergence(&self) -> bool {
        matches!(
            self,
            Error::RichardsonDiverged { .. }
                | Error::WorkerDiverged { .. }
                | Error::NonFiniteUpdate { .. }
        )
    }
}
