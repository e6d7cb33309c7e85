use thiserror::Error;

use crate::arena::Side;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("unsupported config version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("config io error: {0}")]
    Io(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArenaError {
    #[error("{side:?} selected unavailable skill {skill}")]
    RejectedAction { side: Side, skill: usize },
    #[error("{side:?} action out of range: skill {skill}, move {mv}")]
    InvalidAction { side: Side, skill: usize, mv: usize },
    #[error("step called on a terminated match")]
    Terminated,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("skill mask has no available entry")]
    EmptyMask,
    #[error("non-finite activation at tick {tick}")]
    NonFinite { tick: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u16),
    #[error("checkpoint shape mismatch: {0}")]
    Shape(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AcerError {
    #[error("behavior probability is zero (corrupt transition)")]
    ZeroBehaviorProb,
    #[error("empty batch")]
    EmptyBatch,
    #[error("non-finite gradient in episode {episode} at tick {tick}")]
    NonFinite { episode: usize, tick: usize },
    #[error(transparent)]
    Net(#[from] NetError),
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("episode log io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed episode log: {0}")]
    Malformed(String),
}

#[derive(Debug, Error)]
pub enum PoolError {
    #[error("opponent pool is empty")]
    NotReady,
    #[error("pool storage error: {0}")]
    Storage(String),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("missing artifact: {0}")]
    MissingArtifact(String),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Arena(#[from] ArenaError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Pool(#[from] PoolError),
    #[error(transparent)]
    Acer(#[from] AcerError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
