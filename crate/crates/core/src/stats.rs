//! Mergeable running moments and a fixed-order reduction.

use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

/// Running mean and variance (Welford), mergeable in the manner of Chan et al.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MeanVar {
    count: u64,
    mean: f64,
    m2: f64,
}

impl MeanVar {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &MeanVar) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let d = other.mean - self.mean;
        let wb = other.count as f64 / n;
        self.mean += d * wb;
        self.m2 += other.m2 + d * d * self.count as f64 * wb;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero for fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

/// A vector of accumulators, one per site or block.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FieldAccumulator {
    pub cells: Vec<MeanVar>,
}

impl FieldAccumulator {
    pub fn new(len: usize) -> Self {
        Self {
            cells: alloc::vec![MeanVar::default(); len],
        }
    }

    pub fn push(&mut self, values: &[f64]) {
        for (c, v) in self.cells.iter_mut().zip(values) {
            c.push(*v);
        }
    }

    pub fn merge(&mut self, other: &FieldAccumulator) {
        for (c, o) in self.cells.iter_mut().zip(&other.cells) {
            c.merge(o);
        }
    }

    pub fn means(&self) -> Vec<f64> {
        self.cells.iter().map(MeanVar::mean).collect()
    }

    pub fn std_errors(&self) -> Vec<f64> {
        self.cells.iter().map(MeanVar::std_error).collect()
    }
}

/// Combines items pairwise along a fixed balanced tree, so the result depends
/// only on the order of `items`.
pub fn tree_reduce<T, F>(mut items: Vec<T>, mut merge: F) -> Option<T>
where
    F: FnMut(T, T) -> T,
{
    while items.len() > 1 {
        let mut next = Vec::with_capacity(items.len().div_ceil(2));
        let mut it = items.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(merge(a, b)),
                None => next.push(a),
            }
        }
        items = next;
    }
    items.pop()
}
