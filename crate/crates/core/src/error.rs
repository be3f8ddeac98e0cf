use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A numeric or structural parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Inputs are well-formed but violate a protocol precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("malformed message: {0}")]
    Message(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("dual solver did not converge after {iterations} iterations (projected gradient norm {grad_norm:e})")]
    NonConvergence { iterations: usize, grad_norm: f64 },

    #[error("agent {agent} failed to decode: {source}")]
    Decode {
        agent: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("player {player}: node {target} is unreachable from node {source_node}")]
    Unreachable {
        player: usize,
        source_node: usize,
        target: usize,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn message(msg: impl Into<String>) -> Self {
        Error::Message(msg.into())
    }
}
