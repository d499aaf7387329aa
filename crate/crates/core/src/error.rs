use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// The space-time residual became NaN or infinite.
    #[error("residual norm is not finite after iteration {iteration}")]
    Divergence { iteration: usize },

    /// A time integrator failed, e.g. Newton did not converge.
    #[error("time step failed on level {level} at index {index}: {message}")]
    Step {
        level: usize,
        index: usize,
        message: String,
    },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    /// Failure inside the simulated distributed runtime.
    #[error("runtime fault on rank {rank}{}: {message}", peer.map(|p| format!(" (peer {p})")).unwrap_or_default())]
    Runtime {
        rank: usize,
        peer: Option<usize>,
        message: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
