use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the allocation pipeline, the simulator and the
/// scenario harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Inputs that do not fit together (missing metrics, mismatched lengths,
    /// unknown agents, invalid parameters).
    #[error("configuration error: {0}")]
    Config(String),

    /// A metric outside its admissible range.
    #[error("domain error: {source_name} reported {value}, outside [{lower}, {upper}]")]
    Domain {
        source_name: String,
        value: f64,
        lower: f64,
        upper: f64,
    },

    /// Every robot has a zero input score; the allocation is undefined.
    #[error("no capable agent: every robot has zero allocation input")]
    NoCapableAgent,

    /// Every robot is failed or holds an empty proposed region.
    #[error("no active agents: every robot is failed or holds an empty proposed region")]
    NoActiveAgents,

    #[error("region is empty")]
    EmptyRegion,

    /// The workspace cannot hold the requested strips and gaps.
    #[error("infeasible partition: {0}")]
    Infeasible(String),

    #[error("degenerate reference boundary (zero-length perimeter)")]
    DegenerateReference,

    #[error("stress trace is empty")]
    EmptyTrace,

    #[error("time {t} s lies before the first trace sample at {start} s")]
    OutOfSpan { t: f64, start: f64 },

    #[error("invalid scenario script: {0}")]
    Validation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
