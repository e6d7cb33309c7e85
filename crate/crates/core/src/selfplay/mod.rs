//! Style-specific learners sharing a snapshot pool.

mod curriculum;
mod pool;
mod store;
mod trainer;

pub use curriculum::{
    pool_dir, run_curriculum, visible_snapshots, CurriculumConfig, CurriculumReport, PoolMode, StyleSummary,
};
pub use pool::{anneal_between, anneal_p, OpponentPool, SnapshotMeta, DEFAULT_RECENT_K, P_END, P_START};
pub use store::{snapshot_if_due, SnapshotStore, INDEX_FILE};
pub use trainer::{fixed_opponent, OpponentFactory, RoundReport, StyleTrainer, TrainerConfig};
