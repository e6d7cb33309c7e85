use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::NetError;

/// Scalar type the network can run in: `f32` for play and training, `f64` for gradient checks.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + AddAssign + SubAssign + MulAssign + Sum + Debug + Default + Send + Sync + 'static
{
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NetShape {
    pub obs_len: usize,
    pub hidden: usize,
    /// Skill head width, including no-op.
    pub skills: usize,
    pub moves: usize,
}

/// Parameter blocks in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    InputWeights,
    RecurrentWeights,
    InputBias,
    RecurrentBias,
    SkillPolicyWeights,
    SkillPolicyBias,
    SkillQWeights,
    SkillQBias,
    MovePolicyWeights,
    MovePolicyBias,
    MoveQWeights,
    MoveQBias,
}

impl Block {
    pub const ALL: [Block; 12] = [
        Block::InputWeights,
        Block::RecurrentWeights,
        Block::InputBias,
        Block::RecurrentBias,
        Block::SkillPolicyWeights,
        Block::SkillPolicyBias,
        Block::SkillQWeights,
        Block::SkillQBias,
        Block::MovePolicyWeights,
        Block::MovePolicyBias,
        Block::MoveQWeights,
        Block::MoveQBias,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Block::InputWeights => "gru.w_input",
            Block::RecurrentWeights => "gru.w_recurrent",
            Block::InputBias => "gru.b_input",
            Block::RecurrentBias => "gru.b_recurrent",
            Block::SkillPolicyWeights => "skill_pi.w",
            Block::SkillPolicyBias => "skill_pi.b",
            Block::SkillQWeights => "skill_q.w",
            Block::SkillQBias => "skill_q.b",
            Block::MovePolicyWeights => "move_pi.w",
            Block::MovePolicyBias => "move_pi.b",
            Block::MoveQWeights => "move_q.w",
            Block::MoveQBias => "move_q.b",
        }
    }

    /// Row-major dimensions; biases are one-dimensional.
    pub fn dims(self, s: &NetShape) -> Vec<usize> {
        let h3 = 3 * s.hidden;
        match self {
            Block::InputWeights => vec![h3, s.obs_len],
            Block::RecurrentWeights => vec![h3, s.hidden],
            Block::InputBias | Block::RecurrentBias => vec![h3],
            Block::SkillPolicyWeights | Block::SkillQWeights => vec![s.skills, s.hidden],
            Block::SkillPolicyBias | Block::SkillQBias => vec![s.skills],
            Block::MovePolicyWeights | Block::MoveQWeights => vec![s.moves, s.hidden],
            Block::MovePolicyBias | Block::MoveQBias => vec![s.moves],
        }
    }

    fn fan_in(self, s: &NetShape) -> usize {
        match self {
            Block::InputWeights | Block::InputBias => s.obs_len,
            _ => s.hidden,
        }
    }

    /// Whether the block belongs to the skill heads, the move heads, or the shared trunk.
    pub fn head(self) -> Option<crate::policy::Head> {
        use crate::policy::Head;
        match self {
            Block::SkillPolicyWeights | Block::SkillPolicyBias | Block::SkillQWeights | Block::SkillQBias => {
                Some(Head::Skill)
            }
            Block::MovePolicyWeights | Block::MovePolicyBias | Block::MoveQWeights | Block::MoveQBias => {
                Some(Head::Move)
            }
            _ => None,
        }
    }
}

/// Flat parameter (or gradient) buffer with a fixed block layout.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams<F> {
    shape: NetShape,
    offsets: [usize; 13],
    data: Vec<F>,
}

fn offsets_for(shape: &NetShape) -> [usize; 13] {
    let mut offsets = [0usize; 13];
    for (i, b) in Block::ALL.iter().enumerate() {
        offsets[i + 1] = offsets[i] + b.dims(shape).iter().product::<usize>();
    }
    offsets
}

impl<F: Real> NetworkParams<F> {
    pub fn zeros(shape: NetShape) -> Self {
        let offsets = offsets_for(&shape);
        NetworkParams { shape, offsets, data: vec![F::zero(); offsets[12]] }
    }

    /// Uniform in +-1/sqrt(fan_in) per block.
    pub fn init(shape: NetShape, seed: u64) -> Self {
        let mut p = Self::zeros(shape);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for b in Block::ALL {
            let bound = 1.0 / (b.fan_in(&shape) as f64).sqrt();
            for v in p.block_mut(b) {
                *v = F::of(rng.random_range(-bound..bound));
            }
        }
        p
    }

    pub fn from_vec(shape: NetShape, data: Vec<F>) -> Result<Self, NetError> {
        let offsets = offsets_for(&shape);
        if data.len() != offsets[12] {
            return Err(NetError::Shape(format!(
                "expected {} parameters, got {}",
                offsets[12],
                data.len()
            )));
        }
        Ok(NetworkParams { shape, offsets, data })
    }

    pub fn shape(&self) -> &NetShape {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[F] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn block_range(&self, b: Block) -> std::ops::Range<usize> {
        let i = b as usize;
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn block(&self, b: Block) -> &[F] {
        &self.data[self.block_range(b)]
    }

    pub fn block_mut(&mut self, b: Block) -> &mut [F] {
        let r = self.block_range(b);
        &mut self.data[r]
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.shape)
    }

    pub fn cast<G: Real>(&self) -> NetworkParams<G> {
        NetworkParams {
            shape: self.shape,
            offsets: self.offsets,
            data: self.data.iter().map(|v| G::of(v.to_f64().unwrap_or(f64::NAN))).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
    }

    pub fn scale(&mut self, k: F) {
        for a in &mut self.data {
            *a *= k;
        }
    }

    pub fn norm(&self) -> f64 {
        self.data
            .iter()
            .map(|v| {
                let x = v.to_f64().unwrap_or(f64::NAN);
                x * x
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Zero every block that belongs to `head`.
    pub fn zero_head(&mut self, head: crate::policy::Head) {
        for b in Block::ALL {
            if b.head() == Some(head) {
                for v in self.block_mut(b) {
                    *v = F::zero();
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape() -> NetShape {
        NetShape { obs_len: 5, hidden: 4, skills: 3, moves: 18 }
    }

    #[test]
    fn layout_covers_every_block() {
        let p = NetworkParams::<f32>::zeros(shape());
        let expected: usize = Block::ALL.iter().map(|b| b.dims(&shape()).iter().product::<usize>()).sum();
        assert_eq!(p.len(), expected);
        assert_eq!(p.block(Block::InputWeights).len(), 12 * 5);
        assert_eq!(p.block(Block::MoveQBias).len(), 18);
    }

    #[test]
    fn init_is_bounded_and_seeded() {
        let a = NetworkParams::<f32>::init(shape(), 9);
        let b = NetworkParams::<f32>::init(shape(), 9);
        assert_eq!(a, b);
        let bound = 1.0 / (5f32).sqrt();
        assert!(a.block(Block::InputWeights).iter().all(|v| v.abs() <= bound));
        assert!(a.is_finite());
    }
}
