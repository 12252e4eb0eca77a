use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate {kind} `{key}`")]
    DuplicateKey { kind: &'static str, key: String },

    #[error("unknown api `{api_id}` referenced by mashup `{mashup_id}`")]
    UnresolvedApi { mashup_id: String, api_id: String },

    #[error("{what} {index} out of range (len {len})")]
    OutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no node covers keyword(s): {}", .0.join(", "))]
    UnsatisfiableKeywords(Vec<String>),

    #[error("search budget exhausted after {pops} pops without a covering tree")]
    Timeout { pops: u64 },

    #[error("composition vector is zero; direction undefined")]
    DegenerateVector,

    #[error("matroid infeasible: need {needed} distinct clusters, found {available}")]
    Infeasible { needed: usize, available: usize },

    #[error("artifact mismatch: {0}")]
    Consistency(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
