use rand::Rng;

use crate::error::{Error, Result};
use crate::sim::EgoObservation;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: [f64; EgoObservation::DIM],
    /// Physical acceleration, m/s².
    pub action: f64,
    pub reward: f64,
    pub next_state: [f64; EgoObservation::DIM],
    /// True for terminal outcomes only; a max-steps cut-off still bootstraps.
    pub done: bool,
}

impl Transition {
    pub fn is_finite(&self) -> bool {
        self.state.iter().chain(&self.next_state).all(|v| v.is_finite())
            && self.action.is_finite()
            && self.reward.is_finite()
    }
}

/// Fixed-capacity ring; once full, each store overwrites the oldest item.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: Vec<Transition>,
    capacity: usize,
    oldest: usize,
}

impl ReplayBuffer {
    pub const DEFAULT_CAPACITY: usize = 50_000;

    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be at least 1".into()));
        }
        Ok(ReplayBuffer {
            items: Vec::with_capacity(capacity.min(4096)),
            capacity,
            oldest: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn store(&mut self, transition: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(transition);
        } else {
            self.items[self.oldest] = transition;
            self.oldest = (self.oldest + 1) % self.capacity;
        }
    }

    /// Contents from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let (newer, older) = self.items.split_at(self.oldest);
        older.iter().chain(newer)
    }

    /// Uniform draw with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<Transition>> {
        if batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.items.len() < batch_size {
            return Err(Error::Underfilled {
                len: self.items.len(),
                batch: batch_size,
            });
        }
        Ok((0..batch_size)
            .map(|_| self.items[rng.random_range(0..self.items.len())])
            .collect())
    }
}
