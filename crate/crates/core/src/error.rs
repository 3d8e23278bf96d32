use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown target: {0}")]
    UnknownTarget(String),
    #[error("duplicate url: {0}")]
    DuplicateUrl(String),
    #[error("invalid corpus: {0}")]
    InvalidCorpus(String),
    #[error("indexing not authorized for pod {0}")]
    IndexingNotAuthorized(String),
    #[error("stale index for pod {pod}: built at {built_at}, pod revision {revision}")]
    StaleIndex {
        pod: String,
        built_at: u64,
        revision: u64,
    },
    #[error("stale metadata profile for pod {pod}: built at {built_at}, pod revision {revision}")]
    StaleProfile {
        pod: String,
        built_at: u64,
        revision: u64,
    },
    #[error("stale metadata: {0}")]
    StaleMetadata(String),
    #[error("invalid bloom parameters: {0}")]
    InvalidParams(String),
    #[error("scope violation: {requester} may not read the sketch scoped to {owner}")]
    ScopeViolation { requester: String, owner: String },
    #[error("empty query")]
    EmptyQuery,
    #[error("unknown strategy: {0}")]
    UnknownStrategy(String),
    #[error("unknown metadata mode: {0}")]
    UnknownMode(String),
    #[error("unauthenticated session handle: {0}")]
    Unauthenticated(String),
    #[error("result log mixes servers {0} and {1}")]
    MixedServerLog(String, String),
    #[error("incomplete audit: missing {0}")]
    IncompleteAudit(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
