use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("backward root node {node} carries y-derivatives; expected a scalar loss")]
    NonScalarRoot { node: usize },

    #[error("non-finite value encountered at graph node {node}")]
    NonFiniteNode { node: usize },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite parameter at index {index}")]
    NonFiniteParam { index: usize },

    #[error("non-finite gradient entry at parameter index {index}")]
    NonFiniteGradient { index: usize },

    #[error("Langevin chain diverged at step {step}")]
    ChainDiverged { step: usize },

    #[error("non-finite derivative during prediction at iteration {iteration}")]
    PredictorDiverged { iteration: usize },

    #[error("checkpoint field `{path}`: {msg}")]
    Checkpoint { path: String, msg: String },

    #[error("protocol: {0}")]
    Protocol(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Numerical breakdown during training: recorded as a failed run rather
    /// than surfaced as a crash.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteNode { .. }
                | Error::NonFiniteParam { .. }
                | Error::NonFiniteGradient { .. }
                | Error::ChainDiverged { .. }
        )
    }
}
