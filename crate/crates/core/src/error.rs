use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("unknown atomic proposition `{0}`")]
    UnknownAtom(String),

    #[error("invalid automaton: {0}")]
    InvalidAutomaton(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid environment spec: {0}")]
    InvalidSpec(String),

    #[error("action {action} is not enabled at state {state}")]
    ActionNotEnabled { state: String, action: String },

    #[error("automaton proposition `{0}` is not declared by the model")]
    AlphabetMismatch(String),

    #[error("product exceeds the state cap of {0}")]
    StateCapExceeded(usize),

    #[error("policy has no action for reachable product state {0}")]
    PolicyGap(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
