use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit count {0} out of range 1..=24")]
    QubitCount(usize),

    #[error("qubit index {index} out of range for {n_qubits} qubits")]
    QubitIndex { index: usize, n_qubits: usize },

    #[error("invalid gate: {0}")]
    InvalidGate(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("single-class input: {0}")]
    SingleClass(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown feature name `{0}`")]
    UnknownFeature(String),

    #[error("degenerate seed {seed}: {reason}")]
    DegenerateSeed { seed: u64, reason: String },

    #[error("protocol assertion failed: {0}")]
    Protocol(String),

    #[error("subset A and subset B share {0} row(s)")]
    SubsetOverlap(usize),

    #[error("stream `{stream}` is not sorted by TimeUS at row {row}")]
    UnsortedStream { stream: String, row: usize },

    #[error("parse error in {path}: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("checksum mismatch for {path}: expected {expected}, got {actual}")]
    Checksum {
        path: PathBuf,
        expected: String,
        actual: String,
    },

    #[error("optimizer failed: {0}")]
    Optimizer(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
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
