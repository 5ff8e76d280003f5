//! Class-balanced replay: adopted and rejected rounds are kept in separate bounded FIFOs
//! and every batch draws half from each.

use std::collections::VecDeque;

use rand::Rng;

use super::features::FeatureVector;
use crate::bidding::KpiVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub features: FeatureVector,
    /// Budget-normalized performance report that was shown.
    pub perf_norm: KpiVector,
    /// Whether the advertiser adopted.
    pub label: bool,
}

impl TrainingExample {
    pub fn new(features: FeatureVector, perf_norm: KpiVector, label: bool) -> Result<Self> {
        if perf_norm.values().iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Contract(format!(
                "normalized performance must be finite and nonnegative: {:?}",
                perf_norm.values()
            )));
        }
        Ok(Self {
            features,
            perf_norm,
            label,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    positives: VecDeque<TrainingExample>,
    negatives: VecDeque<TrainingExample>,
    capacity: usize,
}

impl ReplayBuffer {
    /// `capacity` is per class.
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be at least 1".into()));
        }
        Ok(Self {
            positives: VecDeque::with_capacity(capacity),
            negatives: VecDeque::with_capacity(capacity),
            capacity,
        })
    }

    pub fn push(&mut self, example: TrainingExample) {
        let pool = if example.label {
            &mut self.positives
        } else {
            &mut self.negatives
        };
        if pool.len() == self.capacity {
            pool.pop_front();
        }
        pool.push_back(example);
    }

    pub fn positives(&self) -> usize {
        self.positives.len()
    }

    pub fn negatives(&self) -> usize {
        self.negatives.len()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// `batch / 2` draws with replacement from each pool, positives first. `None` until
    /// both pools hold at least `batch / 2` examples.
    pub fn sample_balanced<R: Rng + ?Sized>(
        &self,
        batch: usize,
        rng: &mut R,
    ) -> Option<Vec<&TrainingExample>> {
        let half = batch / 2;
        if half == 0 || self.positives.len() < half || self.negatives.len() < half {
            return None;
        }
        let mut out = Vec::with_capacity(2 * half);
        for pool in [&self.positives, &self.negatives] {
            for _ in 0..half {
                out.push(&pool[rng.random_range(0..pool.len())]);
            }
        }
        Some(out)
    }
}
