use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::DataError;

/// Infinite stream of instance indices with inverse-frequency class weighting.
///
/// Each draw picks a class with probability proportional to
/// `count · (1 / count)` (so each class equally often), then an instance
/// uniformly within that class.
#[derive(Clone, Debug)]
pub struct WeightedSampler {
    by_class: [Vec<usize>; 2],
    positive_probability: f64,
    rng: ChaCha8Rng,
}

impl WeightedSampler {
    pub fn new(labels: &[u8], seed: u64) -> Result<Self, DataError> {
        let mut by_class = [Vec::new(), Vec::new()];
        for (i, &l) in labels.iter().enumerate() {
            by_class[usize::from(l.min(1))].push(i);
        }
        let (neg, pos) = (by_class[0].len(), by_class[1].len());
        if neg == 0 || pos == 0 {
            return Err(DataError::SingleClass {
                negatives: neg,
                positives: pos,
            });
        }
        let mass = |n: usize| n as f64 * (1.0 / n as f64);
        let positive_probability = mass(pos) / (mass(pos) + mass(neg));
        Ok(Self {
            by_class,
            positive_probability,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn positive_probability(&self) -> f64 {
        self.positive_probability
    }

    pub fn next_index(&mut self) -> usize {
        let class = usize::from(self.rng.random_bool(self.positive_probability));
        let members = &self.by_class[class];
        members[self.rng.random_range(0..members.len())]
    }
}

impl Iterator for WeightedSampler {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        Some(self.next_index())
    }
}
