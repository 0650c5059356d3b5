use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("history of length {history} exceeds tester horizon {horizon}")]
    ScheduleOverflow { history: usize, horizon: usize },

    #[error("invalid history: {0}")]
    InvalidHistory(String),

    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),

    #[error("epoch overflow: episode length {episode_length} already reached, reset required")]
    EpochOverflow { episode_length: usize },

    #[error("action sequence has length {got}, expected {expected}")]
    SequenceLength { expected: usize, got: usize },

    #[error("action index {0} is outside the action alphabet")]
    UnknownAction(usize),

    #[error("sequence space {size} exceeds the enumeration guard {guard}")]
    EnumerationGuard { size: u128, guard: u128 },

    #[error("invalid maze: {0}")]
    InvalidMaze(String),

    #[error("no marked element: search requires k >= 1")]
    NoSolution,

    #[error("state vector is not normalized (norm^2 = {0})")]
    NotNormalized(f64),

    #[error("implanted percepts do not match branch {branch}: slot {slot} was not restored")]
    PerceptVerification { branch: usize, slot: usize },

    #[error("oracle construction failed on branch {branch} ({sequence}): {reason}")]
    ConstructionFailure { branch: usize, sequence: String, reason: String },

    #[error("ledger violation: {0}")]
    LedgerViolation(String),

    #[error("invalid agent state: {0}")]
    InvalidAgent(String),

    #[error("agent is not in the {expected} phase")]
    WrongPhase { expected: &'static str },

    #[error("found sequence is not rewarding")]
    NotRewarding,

    #[error("invalid configuration field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("toml parse error: {0}")]
    TomlDe(#[from] toml::de::Error),

    #[error("toml write error: {0}")]
    TomlSer(#[from] toml::ser::Error),
}

impl Error {
    /// Process exit status: 2 for failed verification, 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::PerceptVerification { .. } | Error::ConstructionFailure { .. } | Error::LedgerViolation(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config { field: field.into(), reason: reason.into() }
    }
}
