use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("power iteration did not converge after {iterations} iterations")]
    ConvergenceFailure { iterations: usize },

    #[error("rank-deficient system: numerical rank {rank} of {cols} columns")]
    RankDeficient { rank: usize, cols: usize },

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("bound violated: {0}")]
    BoundViolation(String),

    #[error("training diverged (last finite epoch {last_finite_epoch})")]
    TrainingDiverged { last_finite_epoch: usize },

    #[error("evaluation failed at sample {sample}, rotation {rotation}: {message}")]
    Evaluation {
        sample: usize,
        rotation: usize,
        message: String,
    },

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
