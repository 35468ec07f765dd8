use std::path::PathBuf;

use thiserror::Error;

use crate::edit::OperatorKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("empty sentence")]
    EmptySentence,

    #[error("position {position} out of range for sentence of length {len}")]
    IndexOutOfRange { position: usize, len: usize },

    #[error("operator {op} is not valid at position {position} of a length-{len} sentence")]
    InvalidOperator {
        op: OperatorKind,
        position: usize,
        len: usize,
    },

    #[error("operator {0} has no reconstruction target")]
    NoReconstructionTarget(OperatorKind),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("failed to load {path}: {source}")]
    Load {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("missing prerequisite: {0}")]
    Precondition(String),

    #[error("training diverged at episode {episode}: {detail}")]
    Divergence { episode: u64, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
