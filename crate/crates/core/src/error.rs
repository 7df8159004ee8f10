use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("qubit {qubit} out of range for {n_qubits}-qubit register")]
    QubitOutOfRange { qubit: usize, n_qubits: usize },

    #[error("gate {0} uses the same qubit twice")]
    DuplicateQubit(String),

    #[error("unknown topology `{name}`; valid names: {}", valid.join(", "))]
    UnknownTopology { name: String, valid: Vec<String> },

    #[error("invalid coupling map: {0}")]
    InvalidCoupling(String),

    #[error("gate {gate} is not legal for a {kind} operator")]
    IllegalGate { gate: String, kind: &'static str },

    #[error("step called on a finished episode")]
    StepAfterDone,

    #[error("action {action} out of range ({n_actions} actions)")]
    InvalidAction { action: usize, n_actions: usize },

    #[error("episode did not reach the identity")]
    NotSolved,

    #[error("operator matrix is not the identity")]
    MatrixNotIdentity,

    #[error("difficulty must be at least 1")]
    ZeroDifficulty,

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("non-finite loss during update")]
    NonFiniteLoss,

    #[error("search bound exceeded: {0}")]
    BoundExceeded(String),

    #[error("unitary is not Clifford: {0}")]
    NonClifford(String),

    #[error("routing error: {0}")]
    Routing(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }

    pub(crate) fn config(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config { path: path.into(), msg: msg.into() }
    }
}
