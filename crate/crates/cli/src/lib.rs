//! Command-line surface and live duel server for the arena.

pub mod client;
pub mod protocol;
pub mod server;
