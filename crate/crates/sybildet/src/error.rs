//! Error type shared across the detection pipeline.

use thiserror::Error;

/// All failure modes surfaced by the library.
///
/// Variants are grouped by nature: input problems (malformed files,
/// records, edges), data degeneracies (single-class labels, nodes the
/// walk cannot reach), and internal invariant violations that indicate
/// a bug rather than bad input.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed record: {0}")]
    MalformedRecord(String),

    #[error("malformed edge: {0}")]
    MalformedEdge(String),

    #[error("malformed data: {0}")]
    MalformedData(String),

    #[error("malformed prior: {0}")]
    MalformedPrior(String),

    #[error("missing prior for node '{0}'")]
    MissingPrior(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("model format: {0}")]
    ModelFormat(String),

    #[error("isolated node: {0}")]
    IsolatedNode(String),

    #[error("unreachable node: {0}")]
    UnreachableNode(String),

    #[error("non-absorbing walk: {0}")]
    NonabsorbingWalk(String),

    #[error("no data: {0}")]
    NoData(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("invariant violation: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
