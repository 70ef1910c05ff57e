use std::collections::VecDeque;

use rand::seq::index::sample;
use rand::Rng;

/// Fixed-capacity FIFO experience buffer.
#[derive(Clone, Debug)]
pub struct ReplayMemory<T> {
    capacity: usize,
    items: VecDeque<T>,
}

impl<T> ReplayMemory<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayMemory { capacity, items: VecDeque::with_capacity(capacity) }
    }

    pub fn push(&mut self, item: T) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(item);
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

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.items.iter()
    }

    /// Uniform sample of `n` distinct entries, or `None` when fewer are stored.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Option<Vec<&T>> {
        if n > self.items.len() {
            return None;
        }
        Some(sample(rng, self.items.len(), n).into_iter().map(|i| &self.items[i]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn evicts_oldest() {
        let mut m = ReplayMemory::new(3);
        for i in 0..5 {
            m.push(i);
        }
        assert_eq!(m.iter().copied().collect::<Vec<_>>(), vec![2, 3, 4]);
    }

    #[test]
    fn sample_is_distinct() {
        let mut m = ReplayMemory::new(10);
        for i in 0..10 {
            m.push(i);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s: Vec<i32> = m.sample(8, &mut rng).unwrap().into_iter().copied().collect();
        s.sort();
        s.dedup();
        assert_eq!(s.len(), 8);
        assert!(m.sample(11, &mut rng).is_none());
    }
}
