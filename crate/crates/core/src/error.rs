use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("global predicates cannot be used as an `ensuring` constraint")]
    GlobalEnsuring,
    #[error("empty specification")]
    EmptySpec,
    #[error("empty trajectory")]
    EmptyTrajectory,
    #[error("agent {0} out of range")]
    UnknownAgent(usize),
    #[error("agent sets overlap")]
    OverlappingAgents,
    #[error("inconsistent agent count: expected {expected}, got {got}")]
    AgentCount { expected: usize, got: usize },
    #[error("unknown transition id {0}")]
    UnknownTransition(usize),
    #[error("monitor state {0} is final")]
    FinalState(usize),
    #[error("no proposals to resolve")]
    NoProposals,
    #[error("proposal {0} is not among the available transitions")]
    UnavailableProposal(usize),
    #[error("product monitor exceeded the state cap after {0} states")]
    StateCap(usize),
    #[error("degenerate rollout with horizon 0")]
    DegenerateRollout,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("non-finite score: {0}")]
    NonFinite(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
