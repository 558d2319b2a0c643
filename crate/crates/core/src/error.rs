use std::path::PathBuf;

/// Errors produced anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("duplicate document id `{0}`")]
    DuplicateId(String),

    #[error("document `{0}` is empty after tokenization")]
    EmptyDocument(String),

    #[error("unknown split `{split}` for document `{id}`")]
    UnknownSplit { id: String, split: String },

    #[error("unknown document id `{0}`")]
    UnknownDocument(String),

    #[error("document `{id}`: {msg}")]
    Annotation { id: String, msg: String },

    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty vocabulary (min_df = {0})")]
    EmptyVocabulary(usize),

    #[error("conflicting weights for edge ({src}, {dst}): {a} vs {b}")]
    ConflictingEdge { src: usize, dst: usize, a: f64, b: f64 },

    #[error("non-positive degree {degree} at node {node} of graph `{graph}`")]
    NonPositiveDegree {
        graph: String,
        node: usize,
        degree: f64,
    },

    #[error("unknown model mode `{0}`")]
    UnknownMode(String),

    #[error("autodiff: {0}")]
    Tape(String),

    #[error("non-finite loss at epoch {epoch}: {value}")]
    NonFiniteLoss { epoch: usize, value: f64 },

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
