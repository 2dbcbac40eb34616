use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("{rel} edge between {left} and {right} violates the relation's node-kind constraint")]
    TypeConstraintViolation {
        rel: String,
        left: String,
        right: String,
    },
    #[error("self-loop on node {0} rejected")]
    SelfLoopRejected(usize),
    #[error("node index {index} out of range for graph with {len} nodes")]
    NodeOutOfRange { index: usize, len: usize },
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
    #[error("mixing weights must be non-negative and sum to 1, got {0:?}")]
    InvalidMixingWeights(Vec<f64>),

    #[error("embedding `{id}`: expected width {expected}, got {got}")]
    DimensionMismatch {
        id: String,
        expected: usize,
        got: usize,
    },
    #[error("embedding `{0}` contains a non-numeric or non-finite value")]
    CorruptEmbedding(String),
    #[error("no embedding for node `{0}`")]
    MissingEmbedding(String),

    #[error("need at least 3 non-empty gene clusters with gene-disease edges, found {0}")]
    InsufficientClusters(usize),
    #[error("negative candidate space exhausted after {attempts} draws ({found} of {wanted} sampled)")]
    NegativeSpaceExhausted {
        attempts: usize,
        found: usize,
        wanted: usize,
    },

    #[error("shape mismatch: {0}")]
    ShapeError(String),
    #[error("pair index {index} out of range for {len} embeddings")]
    IndexError { index: usize, len: usize },
    #[error("forward trace does not retain the intermediates needed for backward")]
    StaleTrace,
    #[error("non-finite gradient in epoch {epoch}")]
    NonFiniteGradient { epoch: usize },

    #[error("empty input")]
    EmptyInput,
    #[error("metric requires both positive and negative labels")]
    SingleClassInput,

    #[error("score threshold requested but `{0}` has no score column")]
    MissingScoreColumn(PathBuf),
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("artifact mismatch: {0}")]
    ArtifactMismatch(String),
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Validation and audit failures map to exit code 2, everything else to 1.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InsufficientClusters(_)
                | Error::ArtifactMismatch(_)
                | Error::Config(_)
                | Error::UnknownEntity(_)
                | Error::MissingScoreColumn(_)
                | Error::InvalidMixingWeights(_)
        )
    }
}
