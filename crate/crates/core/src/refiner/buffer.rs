use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Replay-buffer record.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<T> {
    pub state: Vec<T>,
    pub action: Vec<T>,
    pub reward: f64,
    pub next_state: Vec<T>,
    pub done: bool,
}

/// Fixed-capacity FIFO ring of transitions with seeded uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    storage: Vec<Transition<T>>,
    // Next slot to overwrite once full; also the oldest entry.
    head: usize,
    rng: ChaCha8Rng,
}

impl<T: Clone> ReplayBuffer<T> {
    pub const DEFAULT_CAPACITY: usize = 100_000;

    pub fn new(capacity: usize, seed: u64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::invalid("replay buffer capacity must be positive"));
        }
        Ok(Self {
            capacity,
            storage: Vec::with_capacity(capacity.min(4096)),
            head: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn push(&mut self, t: Transition<T>) {
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            self.storage[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    /// Entries from oldest to newest.
    pub fn iter_oldest_first(&self) -> impl Iterator<Item = &Transition<T>> {
        let (newer, older) = self.storage.split_at(self.head);
        older.iter().chain(newer.iter())
    }

    /// Indices of a uniform sample with replacement.
    pub fn sample_indices(&mut self, batch: usize) -> Result<Vec<usize>> {
        if batch == 0 || self.storage.len() < batch {
            return Err(Error::InvalidState(format!(
                "cannot sample {batch} transitions from a buffer holding {}",
                self.storage.len()
            )));
        }
        let n = self.storage.len();
        Ok((0..batch).map(|_| self.rng.random_range(0..n)).collect())
    }

    pub fn sample(&mut self, batch: usize) -> Result<Vec<&Transition<T>>> {
        let idx = self.sample_indices(batch)?;
        Ok(idx.into_iter().map(|i| &self.storage[i]).collect())
    }

    pub fn get(&self, slot: usize) -> Option<&Transition<T>> {
        self.storage.get(slot)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(r: f64) -> Transition<f32> {
        Transition {
            state: vec![0.0],
            action: vec![0.0],
            reward: r,
            next_state: vec![0.0],
            done: true,
        }
    }

    #[test]
    fn fifo_eviction() {
        let mut b = ReplayBuffer::new(3, 0).unwrap();
        for r in 0..4 {
            b.push(t(r as f64));
        }
        assert_eq!(b.len(), 3);
        let rewards: Vec<f64> = b.iter_oldest_first().map(|t| t.reward).collect();
        assert_eq!(rewards, vec![1.0, 2.0, 3.0]);
        b.push(t(4.0));
        let rewards: Vec<f64> = b.iter_oldest_first().map(|t| t.reward).collect();
        assert_eq!(rewards, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn sampling_rules() {
        let mut b = ReplayBuffer::new(10, 7).unwrap();
        assert!(matches!(b.sample(1), Err(Error::InvalidState(_))));
        b.push(t(0.0));
        assert!(b.sample(2).is_err());
        assert_eq!(b.sample(1).unwrap().len(), 1);

        let mut a = ReplayBuffer::new(10, 42).unwrap();
        let mut c = ReplayBuffer::new(10, 42).unwrap();
        for r in 0..10 {
            a.push(t(r as f64));
            c.push(t(r as f64));
        }
        for _ in 0..5 {
            assert_eq!(a.sample_indices(10).unwrap(), c.sample_indices(10).unwrap());
        }
        assert!(ReplayBuffer::<f32>::new(0, 0).is_err());
    }

    #[test]
    fn sampling_is_uniform() {
        let mut b = ReplayBuffer::new(10, 3).unwrap();
        for r in 0..10 {
            b.push(t(r as f64));
        }
        let draws = 100_000;
        let mut counts = [0usize; 10];
        for _ in 0..draws / 10 {
            for i in b.sample_indices(10).unwrap() {
                counts[i] += 1;
            }
        }
        let sigma = (draws as f64 * 0.1 * 0.9).sqrt();
        for c in counts {
            assert!((c as f64 - draws as f64 * 0.1).abs() < 5.0 * sigma, "{counts:?}");
        }
    }
}
