use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("singular geometry: microphone {mic} coincides with loudspeaker {speaker}")]
    SingularGeometry { mic: usize, speaker: usize },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate signal: {0}")]
    DegenerateSignal(String),

    #[error("rank-deficient system (min pivot {pivot:.3e}); add diagonal loading")]
    RankDeficient { pivot: f64 },

    #[error("{algorithm} diverged at iteration {iteration}{}", node.map(|k| format!(" (node {k})")).unwrap_or_default())]
    Divergence {
        algorithm: String,
        node: Option<usize>,
        iteration: usize,
    },

    #[error("protocol error at node {node}: {detail}")]
    Protocol { node: usize, detail: String },

    #[error("invalid topology: {0}")]
    Topology(String),

    #[error("invalid partition: {0}")]
    Partition(String),

    #[error("metric undefined: {0}")]
    Metric(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("ATF file {path}: {detail}")]
    AtfFile { path: PathBuf, detail: String },

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

    /// Attach algorithm and iteration to a divergence raised deeper in the stack.
    pub(crate) fn in_run(self, algorithm: &str, iteration: usize) -> Self {
        match self {
            Error::Divergence { node, .. } => Error::Divergence {
                algorithm: algorithm.to_string(),
                node,
                iteration,
            },
            other => other,
        }
    }
}
