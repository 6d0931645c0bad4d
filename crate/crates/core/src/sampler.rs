//! Mass-proportional slot sampling over a Fenwick tree.

use rand::Rng;

use crate::sum::KahanSum;

/// Slot weights in a binary indexed tree: point update and prefix search in
/// `O(log n)`. Slots are never compacted; a zero weight is never sampled.
#[derive(Debug, Clone)]
pub struct WeightedSampler {
    weights: Vec<f64>,
    tree: Vec<f64>,
    total: KahanSum,
    positive: usize,
    top: usize,
}

impl WeightedSampler {
    pub fn new(weights: &[f64]) -> Self {
        let n = weights.len();
        let mut tree = vec![0.0; n + 1];
        tree[1..].copy_from_slice(weights);
        for i in 1..=n {
            let parent = i + (i & i.wrapping_neg());
            if parent <= n {
                tree[parent] += tree[i];
            }
        }
        let top = if n == 0 {
            0
        } else {
            1 << (usize::BITS - 1 - n.leading_zeros())
        };
        Self {
            weights: weights.to_vec(),
            tree,
            total: weights.iter().copied().collect(),
            positive: weights.iter().filter(|&&w| w > 0.0).count(),
            top,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Number of slots with positive weight.
    pub fn positive_slots(&self) -> usize {
        self.positive
    }

    pub fn weight(&self, slot: usize) -> f64 {
        self.weights[slot]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_weight(&self) -> f64 {
        self.total.value()
    }

    pub fn set(&mut self, slot: usize, weight: f64) {
        let old = self.weights[slot];
        let delta = weight - old;
        match (old > 0.0, weight > 0.0) {
            (true, false) => self.positive -= 1,
            (false, true) => self.positive += 1,
            _ => {}
        }
        self.weights[slot] = weight;
        self.total.add(delta);
        let mut i = slot + 1;
        while i < self.tree.len() {
            self.tree[i] += delta;
            i += i & i.wrapping_neg();
        }
    }

    /// Sum of weights in slots `0..=slot`.
    pub fn prefix_sum(&self, slot: usize) -> f64 {
        let mut i = slot + 1;
        let mut acc = 0.0;
        while i > 0 {
            acc += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        acc
    }

    /// First slot whose inclusive prefix sum exceeds `target`; `len()` if none.
    pub fn find(&self, target: f64) -> usize {
        let mut pos = 0;
        let mut rem = target;
        let mut step = self.top;
        while step > 0 {
            let next = pos + step;
            if next < self.tree.len() && self.tree[next] <= rem {
                pos = next;
                rem -= self.tree[next];
            }
            step >>= 1;
        }
        pos
    }

    /// Draws slot `i` with probability `weight(i) / total_weight()`.
    /// Returns `None` when every weight is zero.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<usize> {
        let total = self.total_weight();
        if !(total > 0.0) {
            return None;
        }
        loop {
            let slot = self.find(rng.random::<f64>() * total);
            // roundoff between the tree and the running total can push the
            // search past the end; redraw rather than bias the boundary
            if slot < self.weights.len() && self.weights[slot] > 0.0 {
                return Some(slot);
            }
        }
    }
}
