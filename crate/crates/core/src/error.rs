use thiserror::Error;

/// Errors raised by the latency model and the solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("prefill requires at least one input token")]
    EmptyPrefill,

    #[error("link unusable: transmission rate is zero")]
    LinkUnusable,

    #[error("no agents to evaluate")]
    NoAgents,

    #[error("KV payload not dominant: D(alpha) = {0} bits is not positive")]
    KvPayloadNotDominant(f64),

    #[error("bandwidth allocation infeasible: agent {agent} has zero SNR")]
    Infeasible { agent: usize },

    #[error("exhaustive search limited to {limit} agents, got {agents}")]
    TooManyAgents { agents: usize, limit: usize },

    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
