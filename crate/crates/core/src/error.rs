use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the simulator, learner, federation and evaluation layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("dangling reference: {kind} `{id}` is not defined")]
    DanglingReference { kind: &'static str, id: String },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("unreachable destination: {0}")]
    UnreachableDestination(String),

    #[error("step called after the episode finished")]
    EpisodeDone,

    #[error("inconsistent event flags: collided and reached destination in the same step")]
    InconsistentFlags,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("replay buffer holds {len} transitions, batch of {batch} requested")]
    Underfilled { len: usize, batch: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("infeasible destination distance {requested} m: route supports (0, {max}] m")]
    InfeasibleDistance { requested: f64, max: f64 },

    #[error("agent {agent} failed: {source}")]
    Agent {
        agent: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}
