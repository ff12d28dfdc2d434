use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Sum-tree proportional sampler: O(log N) update and weighted draw.
///
/// Leaves hold `priority^alpha`; every internal node holds the sum of its
/// children, so prefix-sum descent samples leaf `i` with probability
/// `p_i^alpha / sum_j p_j^alpha`. New transitions enter with the largest
/// priority seen so far, which starts at 1.
#[derive(Debug, Clone)]
pub struct ProportionalSampler {
    capacity: usize,
    len: usize,
    alpha: f64,
    priority_floor: f64,
    max_seen_priority: f64,
    nodes: Vec<f64>,
    raw: Vec<f64>,
}

impl ProportionalSampler {
    pub fn new(capacity: usize, alpha: f64) -> Self {
        assert!(capacity > 0, "capacity must be positive");
        ProportionalSampler {
            capacity,
            len: 0,
            alpha,
            priority_floor: 0.0,
            max_seen_priority: 1.0,
            nodes: vec![0.0; 2 * capacity - 1],
            raw: vec![0.0; capacity],
        }
    }

    /// Replaces an exact-zero priority with `floor` at leaf-write time so
    /// stored experiences stay reachable. Agents enable this; the bare
    /// sampler leaves zero-priority leaves with zero mass.
    pub fn with_priority_floor(mut self, floor: f64) -> Self {
        self.priority_floor = floor;
        self
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn total_mass(&self) -> f64 {
        self.nodes[0]
    }

    pub fn max_seen_priority(&self) -> f64 {
        self.max_seen_priority
    }

    pub fn raw_priority(&self, index: usize) -> f64 {
        self.raw[index]
    }

    /// Mass of leaf `index` (priority^alpha after flooring).
    pub fn leaf_mass(&self, index: usize) -> f64 {
        self.nodes[self.capacity - 1 + index]
    }

    /// Append a new leaf with the given priority; returns its index.
    pub fn push(&mut self, priority: f64) -> Result<usize> {
        if self.len == self.capacity {
            return Err(Error::IndexOutOfRange {
                index: self.len,
                len: self.capacity,
            });
        }
        let index = self.len;
        self.len += 1;
        self.update(index, priority)?;
        Ok(index)
    }

    /// Append a new leaf carrying the maximal priority seen so far.
    pub fn push_with_max(&mut self) -> Result<usize> {
        self.push(self.max_seen_priority)
    }

    /// Set leaf `index` to `priority`; ancestor sums are recomputed.
    pub fn update(&mut self, index: usize, priority: f64) -> Result<()> {
        if index >= self.len {
            return Err(Error::IndexOutOfRange {
                index,
                len: self.len,
            });
        }
        if priority < 0.0 || priority.is_nan() {
            return Err(Error::NegativePriority(priority));
        }
        self.raw[index] = priority;
        if priority > self.max_seen_priority {
            self.max_seen_priority = priority;
        }
        let floored = if priority == 0.0 && self.priority_floor > 0.0 {
            self.priority_floor
        } else {
            priority
        };
        let mut node = self.capacity - 1 + index;
        self.nodes[node] = floored.powf(self.alpha);
        while node > 0 {
            node = (node - 1) / 2;
            let left = 2 * node + 1;
            let right = left + 1;
            // recompute instead of propagating a delta: keeps sums exact
            self.nodes[node] = self.nodes[left]
                + if right < self.nodes.len() {
                    self.nodes[right]
                } else {
                    0.0
                };
        }
        Ok(())
    }

    /// Draw one leaf index with probability proportional to its mass.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Result<usize> {
        let total = self.total_mass();
        if total <= 0.0 {
            return Err(Error::NoMass);
        }
        let u = rng.gen::<f64>() * total;
        Ok(self.descend(u))
    }

    fn descend(&self, mut u: f64) -> usize {
        let mut node = 0usize;
        loop {
            let left = 2 * node + 1;
            if left >= self.nodes.len() {
                break;
            }
            let right = left + 1;
            let left_mass = self.nodes[left];
            let right_mass = if right < self.nodes.len() {
                self.nodes[right]
            } else {
                0.0
            };
            if u < left_mass || right_mass == 0.0 {
                node = left;
            } else {
                u -= left_mass;
                node = right;
            }
        }
        (node + 1 - self.capacity).min(self.len.saturating_sub(1))
    }

    /// Current sampling distribution over occupied leaves.
    pub fn probabilities(&self) -> Vec<f64> {
        let total = self.total_mass();
        (0..self.len)
            .map(|i| {
                if total > 0.0 {
                    self.leaf_mass(i) / total
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Verify every internal node equals the sum of its children.
    pub fn max_consistency_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for node in 0..self.capacity - 1 {
            let left = 2 * node + 1;
            let right = left + 1;
            let sum = self.nodes[left]
                + if right < self.nodes.len() {
                    self.nodes[right]
                } else {
                    0.0
                };
            worst = worst.max((self.nodes[node] - sum).abs());
        }
        worst
    }
}
