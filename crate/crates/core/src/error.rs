use thiserror::Error;

/// Errors raised across the simulator, environment, models and trainer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid qubit index {index} for a {num_qubits}-qubit register")]
    InvalidQubit { index: usize, num_qubits: usize },

    #[error("unknown circuit id {0} (expected 1..=19)")]
    UnknownCircuit(usize),

    #[error("state index {0} out of range (expected 0..=15)")]
    StateOutOfRange(usize),

    #[error("malformed lake map: {0}")]
    MalformedMap(String),

    #[error("episode contract violated: {0}")]
    EpisodeContract(String),

    #[error("value iteration did not converge within {iterations} sweeps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite loss during update {update}: {detail}")]
    NonFiniteLoss { update: usize, detail: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("missing inputs: {}", .0.join(", "))]
    MissingInputs(Vec<String>),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
