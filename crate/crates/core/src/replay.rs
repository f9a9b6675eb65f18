use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envs::Observation;
use crate::error::{Error, Result};

pub const DEFAULT_REPLAY_CAPACITY: usize = 100_000;

/// One agent decision: an atomic step (`tau == 1`) or a whole macro.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Observation,
    pub output_index: usize,
    /// `r_{t+1} + γ r_{t+2} + … + γ^{τ-1} r_{t+τ}`
    pub reward_cum: f64,
    pub tau: usize,
    pub next_state: Observation,
    pub terminal: bool,
    /// Episode ended at the step cap; `next_state` still bootstraps.
    pub truncated: bool,
    /// Slot version of `output_index` when the decision was made.
    pub slot_version: u64,
}

/// Fixed-capacity FIFO ring of transitions with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    entries: Vec<Transition>,
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        let capacity = capacity.max(1);
        Self {
            capacity,
            entries: Vec::with_capacity(capacity.min(4096)),
            head: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.entries.len() < self.capacity {
            self.entries.push(t);
        } else {
            self.entries[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    /// Entries from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let (newer, older) = self.entries.split_at(self.head);
        older.iter().chain(newer.iter())
    }

    /// Draws `batch` distinct entries uniformly at random.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        if batch > self.entries.len() {
            return Err(Error::UnderFilled {
                size: self.entries.len(),
                batch,
            });
        }
        Ok(index::sample(rng, self.entries.len(), batch)
            .into_iter()
            .map(|i| &self.entries[i])
            .collect())
    }

    pub fn clear(&mut self) {
        self.entries.clear();
        self.head = 0;
    }
}
