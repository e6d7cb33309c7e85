//! Recurrent policy/value network with masked skill head.

mod checkpoint;
mod net;
mod params;
mod sample;

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use net::{
    log_prob_weighted_grad, masked_softmax, Head, HeadGrad, HeadOutputs, RecurrentState, StepCache, Trace,
    BPTT_WINDOW, MASKED_LOGIT,
};
pub use params::{Block, NetShape, NetworkParams, Real};
pub use sample::{argmax, sample_action, sample_index};

use crate::arena::{Arena, MOVE_ACTIONS};

/// Default hidden width of the recurrent trunk.
pub const DEFAULT_HIDDEN: usize = 64;

impl NetShape {
    pub fn for_arena(arena: &Arena, hidden: usize) -> Self {
        NetShape {
            obs_len: arena.observation_len(),
            hidden,
            skills: arena.num_skills(),
            moves: MOVE_ACTIONS,
        }
    }

    /// Fails if a network of this shape cannot play in `arena`.
    pub fn check_arena(&self, arena: &Arena) -> Result<(), crate::error::NetError> {
        let want = NetShape::for_arena(arena, self.hidden);
        if *self != want {
            return Err(crate::error::NetError::Shape(format!("network {self:?} does not fit arena {want:?}")));
        }
        Ok(())
    }
}
