use serde::{Deserialize, Serialize};

/// Availability of each skill (index 0 = no-op), packed into a bit set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SkillMask {
    bits: u32,
    len: u8,
}

impl SkillMask {
    pub fn none(len: usize) -> Self {
        assert!(len <= 32, "at most 32 skills");
        SkillMask { bits: 0, len: len as u8 }
    }

    pub fn all(len: usize) -> Self {
        let mut m = SkillMask::none(len);
        m.bits = if len == 32 { u32::MAX } else { (1u32 << len) - 1 };
        m
    }

    pub fn only_noop(len: usize) -> Self {
        let mut m = SkillMask::none(len);
        m.set(0, true);
        m
    }

    pub fn from_bools(values: &[bool]) -> Self {
        let mut m = SkillMask::none(values.len());
        for (i, &v) in values.iter().enumerate() {
            m.set(i, v);
        }
        m
    }

    pub fn from_bits(bits: u32, len: usize) -> Self {
        let all = SkillMask::all(len).bits;
        SkillMask { bits: bits & all, len: len as u8 }
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    pub fn get(&self, i: usize) -> bool {
        i < self.len() && self.bits & (1 << i) != 0
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len(), "mask index {i} out of range");
        if value {
            self.bits |= 1 << i;
        } else {
            self.bits &= !(1 << i);
        }
    }

    pub fn count(&self) -> usize {
        self.bits.count_ones() as usize
    }

    /// True when no-op is the only available entry.
    pub fn is_noop_only(&self) -> bool {
        self.bits == 1
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.len()).map(|i| self.get(i)).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len()).map(|i| self.get(i))
    }
}
