use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::ObsFeatures;
use crate::sim::Action;

/// Paper-scale replay capacity.
pub const REPLAY_CAPACITY: usize = 2_000_000;

/// One stored step. Consecutive transitions share their observation
/// through the `Arc`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Arc<ObsFeatures>,
    pub action: Action,
    pub reward: f64,
    pub next_obs: Arc<ObsFeatures>,
    /// Collision or goal. Timeouts are stored as non-terminal.
    pub terminal: bool,
}

/// Fixed-capacity ring; the oldest item is overwritten first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    items: Vec<T>,
    next: usize,
    pushed: u64,
}

impl<T> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            next: 0,
            pushed: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Total pushes so far, including evicted items.
    pub fn total_pushed(&self) -> u64 {
        self.pushed
    }

    pub fn push(&mut self, item: T) {
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            self.items[self.next] = item;
        }
        self.next = (self.next + 1) % self.capacity;
        self.pushed += 1;
    }

    /// Uniform sampling with replacement.
    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Result<Vec<&T>> {
        if self.items.len() < n || n == 0 {
            return Err(Error::NotReady {
                have: self.items.len(),
                need: n.max(1),
            });
        }
        Ok((0..n).map(|_| &self.items[rng.random_range(0..self.items.len())]).collect())
    }

    /// Stored items from oldest to newest.
    pub fn iter_oldest_first(&self) -> impl Iterator<Item = &T> {
        let split = if self.items.len() < self.capacity { 0 } else { self.next };
        self.items[split..].iter().chain(self.items[..split].iter())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ring_evicts_oldest() {
        let mut b = ReplayBuffer::new(3);
        for i in 0..4 {
            b.push(i);
        }
        assert_eq!(b.len(), 3);
        assert_eq!(b.iter_oldest_first().copied().collect::<Vec<_>>(), vec![1, 2, 3]);
        for i in 4..9 {
            b.push(i);
            let v: Vec<_> = b.iter_oldest_first().copied().collect();
            assert_eq!(v, vec![i - 2, i - 1, i]);
        }
    }

    #[test]
    fn not_ready_when_short() {
        let mut b = ReplayBuffer::new(10);
        b.push(1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(b.sample(2, &mut rng), Err(Error::NotReady { have: 1, need: 2 })));
        assert_eq!(b.sample(1, &mut rng).unwrap(), vec![&1]);
    }

    #[test]
    fn paper_capacity() {
        assert_eq!(REPLAY_CAPACITY, 2_000_000);
    }
}
