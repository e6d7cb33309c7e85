//! Collection-time data handling: passive no-op skipping, move maintenance and episode logs.

mod episode;
mod log;
mod maintain;
mod skip;

pub use episode::{EpisodeLog, OpponentRef, SnapshotKey, Transition};
pub use log::{decode_episode, dump_text, encode_episode, read_episodes, EpisodeWriter, LOG_MAGIC, LOG_VERSION};
pub use maintain::{maintain_move, MoveMaintainer, MoveTick, DEFAULT_MAINTENANCE, MAINTENANCE_SWEEP};
pub use skip::{filter_episode, is_passive_noop, raw_return, EmptyEpisode, FilteredEpisode, RawTick};
