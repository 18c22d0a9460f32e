use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;

use super::{Experience, ReplayError};

/// Per-action batch sizes for `non_empty` actions: an even split, with the
/// remainder going to uniformly chosen distinct actions.
pub fn sample_counts<R: Rng + ?Sized>(rng: &mut R, non_empty: usize, batch: usize) -> Vec<usize> {
    if non_empty == 0 {
        return Vec::new();
    }
    let mut counts = vec![batch / non_empty; non_empty];
    for i in index::sample(rng, non_empty, batch % non_empty) {
        counts[i] += 1;
    }
    counts
}

/// One FIFO sub-buffer per action id; sampling draws near-equal counts of
/// every action that has at least one stored experience.
#[derive(Debug, Clone)]
pub struct BalancedBuffer {
    capacity: usize,
    slots: Vec<VecDeque<Experience>>,
    inserted: Vec<u64>,
}

impl BalancedBuffer {
    pub fn new(capacity: usize, actions: usize) -> Self {
        let mut buffer = BalancedBuffer {
            capacity,
            slots: Vec::new(),
            inserted: Vec::new(),
        };
        buffer.set_action_count(actions);
        buffer
    }

    /// Capacity of each sub-buffer: the total split evenly over all actions.
    pub fn per_action_capacity(&self) -> usize {
        (self.capacity / self.slots.len().max(1)).max(1)
    }

    /// Re-splits the capacity after the action set grows, evicting the oldest
    /// entries of sub-buffers that are now over their share.
    pub fn set_action_count(&mut self, actions: usize) {
        if actions > self.slots.len() {
            self.slots.resize_with(actions, VecDeque::new);
            self.inserted.resize(actions, 0);
        }
        let cap = self.per_action_capacity();
        for slot in &mut self.slots {
            while slot.len() > cap {
                slot.pop_front();
            }
        }
    }

    pub fn add(&mut self, experience: Experience) {
        if experience.action >= self.slots.len() {
            self.set_action_count(experience.action + 1);
        }
        let cap = self.per_action_capacity();
        let slot = &mut self.slots[experience.action];
        if slot.len() == cap {
            slot.pop_front();
        }
        slot.push_back(experience);
        self.inserted[experience.action] += 1;
    }

    pub fn len(&self) -> usize {
        self.slots.iter().map(VecDeque::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn action_len(&self, action: usize) -> usize {
        self.slots.get(action).map_or(0, VecDeque::len)
    }

    pub fn inserted(&self, action: usize) -> u64 {
        self.inserted.get(action).copied().unwrap_or(0)
    }

    pub fn iter_action(&self, action: usize) -> impl Iterator<Item = &Experience> {
        self.slots.get(action).into_iter().flatten()
    }

    pub fn sample<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        batch: usize,
    ) -> Result<Vec<Experience>, ReplayError> {
        let live: Vec<&VecDeque<Experience>> =
            self.slots.iter().filter(|s| !s.is_empty()).collect();
        if live.is_empty() {
            return Err(ReplayError::Empty);
        }
        let counts = sample_counts(rng, live.len(), batch);
        let mut out = Vec::with_capacity(batch);
        for (slot, n) in live.into_iter().zip(counts) {
            for _ in 0..n {
                out.push(slot[rng.gen_range(0..slot.len())]);
            }
        }
        Ok(out)
    }
}

/// Plain FIFO replay with uniform sampling.
#[derive(Debug, Clone)]
pub struct UniformBuffer {
    capacity: usize,
    items: VecDeque<Experience>,
}

impl UniformBuffer {
    pub fn new(capacity: usize) -> Self {
        UniformBuffer {
            capacity: capacity.max(1),
            items: VecDeque::new(),
        }
    }

    pub fn add(&mut self, experience: Experience) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(experience);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn sample<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        batch: usize,
    ) -> Result<Vec<Experience>, ReplayError> {
        if self.items.is_empty() {
            return Err(ReplayError::Empty);
        }
        Ok((0..batch)
            .map(|_| self.items[rng.gen_range(0..self.items.len())])
            .collect())
    }
}

#[derive(Debug, Clone)]
pub enum ReplayBuffer {
    Balanced(BalancedBuffer),
    Uniform(UniformBuffer),
}

impl ReplayBuffer {
    pub fn add_all(&mut self, experiences: impl IntoIterator<Item = Experience>) {
        for e in experiences {
            match self {
                ReplayBuffer::Balanced(b) => b.add(e),
                ReplayBuffer::Uniform(b) => b.add(e),
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        batch: usize,
    ) -> Result<Vec<Experience>, ReplayError> {
        match self {
            ReplayBuffer::Balanced(b) => b.sample(rng, batch),
            ReplayBuffer::Uniform(b) => b.sample(rng, batch),
        }
    }

    pub fn set_action_count(&mut self, actions: usize) {
        if let ReplayBuffer::Balanced(b) = self {
            b.set_action_count(actions);
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ReplayBuffer::Balanced(b) => b.len(),
            ReplayBuffer::Uniform(b) => b.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
