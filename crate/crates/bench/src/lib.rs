//! Seeded inputs shared by the benchmarks.

use xaikit_core::perturb::Mask;
use xaikit_core::{SplitMix64, Tensor};

/// Uniform `[0, 1)` entries.
pub fn uniform_tensor(shape: Vec<usize>, seed: u64) -> Tensor {
    let mut rng = SplitMix64::new(seed);
    Tensor::from_fn(shape, |_| rng.next_f64()).expect("valid shape")
}

/// `k` Gaussian clusters of `per_cluster` points each in `dim` dimensions.
pub fn clustered_points(k: usize, per_cluster: usize, dim: usize, seed: u64) -> Tensor {
    let mut rng = SplitMix64::new(seed);
    let centres: Vec<f64> = (0..k * dim).map(|_| 10.0 * rng.normal()).collect();
    let mut data = Vec::with_capacity(k * per_cluster * dim);
    for c in 0..k {
        for _ in 0..per_cluster {
            data.extend((0..dim).map(|d| centres[c * dim + d] + rng.normal()));
        }
    }
    Tensor::matrix(k * per_cluster, dim, data).expect("consistent size")
}

/// Scores and labels where positives score higher on average.
pub fn scored_labels(n: usize, seed: u64) -> (Vec<f64>, Vec<bool>) {
    let mut rng = SplitMix64::new(seed);
    (0..n)
        .map(|i| {
            let positive = i % 3 == 0;
            let score = rng.normal() + if positive { 1.0 } else { 0.0 };
            // coarse rounding gives the curve some tied scores
            ((score * 100.0).round() / 100.0, positive)
        })
        .unzip()
}

/// Random lookup table over all `2^m` coalitions.
pub struct TableGame {
    m: usize,
    table: Vec<f64>,
}

impl TableGame {
    pub fn new(m: usize, seed: u64) -> Self {
        let mut rng = SplitMix64::new(seed);
        Self {
            m,
            table: (0..1usize << m).map(|_| rng.normal()).collect(),
        }
    }

    pub fn value(&self, z: &Mask) -> f64 {
        let index: usize = (0..self.m).filter(|&i| z.get(i)).map(|i| 1 << i).sum();
        self.table[index]
    }
}
