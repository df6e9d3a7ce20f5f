use rayon::prelude::*;
use serde::Serialize;

use super::EmbeddingSet;
use crate::error::{invalid, Result};
use crate::numerics::{SplitMix64, Tensor};

/// Exact t-SNE is quadratic in memory and time.
pub const TSNE_MAX_POINTS: usize = 5000;

const ENTROPY_TOLERANCE: f64 = 1e-10;
const BISECTION_STEPS: usize = 200;
const MIN_GAIN: f64 = 0.01;
const AFFINITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TsneConfig {
    /// Clamped to `(N - 1) / 3` for small inputs.
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub exaggeration: f64,
    pub exaggeration_iterations: usize,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub momentum_switch: usize,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 100.0,
            exaggeration: 4.0,
            exaggeration_iterations: 100,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch: 250,
            seed: 0,
        }
    }
}

impl TsneConfig {
    /// The perplexity actually used for `n` points.
    pub fn effective_perplexity(&self, n: usize) -> Result<f64> {
        if !(self.perplexity >= 2.0) {
            return Err(invalid(format!("perplexity must be at least 2, got {}", self.perplexity)));
        }
        let p = self.perplexity.min((n as f64 - 1.0) / 3.0);
        if p < 2.0 {
            return Err(invalid(format!("infeasible perplexity: {n} points allow at most {p:.3}")));
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TsneResult {
    /// `N x 2`, centred on the origin.
    pub coordinates: Tensor,
    pub perplexity: f64,
    /// Entropy (nats) of each point's conditional distribution.
    pub entropies: Vec<f64>,
    pub initial_kl: f64,
    pub final_kl: f64,
}

fn squared_distances(x: &Tensor) -> Vec<f64> {
    let n = x.rows();
    let mut d = vec![0.0; n * n];
    d.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let xi = x.row(i);
        for (j, out) in row.iter_mut().enumerate() {
            *out = xi.iter().zip(x.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
        }
    });
    d
}

/// Conditional `p_{j|i}` for offsets `d` (self excluded) at precision `beta`,
/// and its entropy.
fn conditional(d: &[f64], beta: f64, out: &mut [f64]) -> f64 {
    let mut z = 0.0;
    for (o, &dj) in out.iter_mut().zip(d) {
        *o = (-beta * dj).exp();
        z += *o;
    }
    let mut weighted = 0.0;
    for (o, &dj) in out.iter_mut().zip(d) {
        *o /= z;
        weighted += dj * *o;
    }
    z.ln() + beta * weighted
}

/// Bisection on the precision so the entropy hits `target`.
fn calibrate_row(dist: &[f64], target: f64) -> Result<(Vec<f64>, f64)> {
    let m = dist.len();
    let dmin = dist.iter().copied().fold(f64::INFINITY, f64::min);
    let d: Vec<f64> = dist.iter().map(|v| v - dmin).collect();
    let mut p = vec![0.0; m];
    if d.iter().all(|&v| v == 0.0) {
        // every neighbour equidistant: no bandwidth changes the distribution
        p.fill(1.0 / m as f64);
        return Ok((p, (m as f64).ln()));
    }
    let ties = d.iter().filter(|&&v| v == 0.0).count();
    if (ties as f64).ln() > target {
        return Err(invalid(format!(
            "infeasible perplexity: {ties} coincident nearest neighbours exceed it"
        )));
    }
    let (mut lo, mut hi) = (0.0, 1.0 / d.iter().copied().fold(0.0, f64::max));
    while conditional(&d, hi, &mut p) > target {
        lo = hi;
        hi *= 2.0;
    }
    let mut h = f64::NAN;
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        h = conditional(&d, mid, &mut p);
        if (h - target).abs() <= ENTROPY_TOLERANCE || mid == lo || mid == hi {
            break;
        }
        if h > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((p, h))
}

/// Symmetrised joint affinities `(p_{j|i} + p_{i|j}) / 2N`, floored.
fn joint_affinities(d: &[f64], n: usize, perplexity: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let target = perplexity.ln();
    let rows: Vec<(Vec<f64>, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let others: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| d[i * n + j]).collect();
            calibrate_row(&others, target)
        })
        .collect::<Result<_>>()?;
    let mut cond = vec![0.0; n * n];
    let mut entropies = Vec::with_capacity(n);
    for (i, (p, h)) in rows.into_iter().enumerate() {
        let mut it = p.into_iter();
        for j in (0..n).filter(|&j| j != i) {
            cond[i * n + j] = it.next().expect("row length");
        }
        entropies.push(h);
    }
    let scale = 1.0 / (2.0 * n as f64);
    let mut joint = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                joint[i * n + j] = ((cond[i * n + j] + cond[j * n + i]) * scale).max(AFFINITY_FLOOR);
            }
        }
    }
    Ok((joint, entropies))
}

/// Student-t kernel rows `1 / (1 + |y_i - y_j|^2)` and their total.
fn kernel(y: &[f64], n: usize) -> (Vec<f64>, f64) {
    let mut num = vec![0.0; n * n];
    let row_sums: Vec<f64> = num
        .par_chunks_mut(n)
        .enumerate()
        .map(|(i, row)| {
            let mut s = 0.0;
            for (j, out) in row.iter_mut().enumerate() {
                if i != j {
                    let dx = y[2 * i] - y[2 * j];
                    let dy = y[2 * i + 1] - y[2 * j + 1];
                    *out = 1.0 / (1.0 + dx * dx + dy * dy);
                    s += *out;
                }
            }
            s
        })
        .collect();
    (num, row_sums.iter().sum())
}

fn kl_divergence(p: &[f64], y: &[f64], n: usize) -> f64 {
    let (num, total) = kernel(y, n);
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let q = (num[i * n + j] / total).max(AFFINITY_FLOOR);
                let pij = p[i * n + j];
                kl += pij * (pij / q).ln();
            }
        }
    }
    kl
}

fn center(y: &mut [f64]) {
    let n = (y.len() / 2) as f64;
    for c in 0..2 {
        let mean = y.iter().skip(c).step_by(2).sum::<f64>() / n;
        y.iter_mut().skip(c).step_by(2).for_each(|v| *v -= mean);
    }
}

/// Exact t-SNE into two dimensions.
///
/// Rows are processed in parallel but every reduction has a fixed order, so
/// the output does not depend on the number of worker threads.
pub fn tsne_embed(x: &EmbeddingSet, config: &TsneConfig) -> Result<TsneResult> {
    let n = x.len();
    if n < 5 {
        return Err(invalid(format!("t-SNE needs at least 5 points, got {n}")));
    }
    if n > TSNE_MAX_POINTS {
        return Err(invalid(format!("t-SNE is limited to {TSNE_MAX_POINTS} points, got {n}")));
    }
    if config.iterations == 0 {
        return Err(invalid("t-SNE needs at least one iteration"));
    }
    if !(config.learning_rate > 0.0) || !(config.exaggeration >= 1.0) {
        return Err(invalid("learning rate must be positive and exaggeration at least 1"));
    }
    let perplexity = config.effective_perplexity(n)?;
    let dist = squared_distances(x.matrix());
    let (p, entropies) = joint_affinities(&dist, n, perplexity)?;

    let mut rng = SplitMix64::new(config.seed);
    let mut y: Vec<f64> = (0..2 * n).map(|_| 1e-2 * rng.normal()).collect();
    center(&mut y);
    let initial_kl = kl_divergence(&p, &y, n);

    let mut update = vec![0.0; 2 * n];
    let mut gains = vec![1.0f64; 2 * n];
    let mut grad = vec![0.0; 2 * n];
    for iter in 0..config.iterations {
        let exaggeration = if iter < config.exaggeration_iterations {
            config.exaggeration
        } else {
            1.0
        };
        let momentum = if iter < config.momentum_switch {
            config.initial_momentum
        } else {
            config.final_momentum
        };
        let (num, total) = kernel(&y, n);
        grad.par_chunks_mut(2).enumerate().for_each(|(i, g)| {
            let (mut gx, mut gy) = (0.0, 0.0);
            for j in 0..n {
                if i != j {
                    let k = i * n + j;
                    let w = (exaggeration * p[k] - num[k] / total) * num[k];
                    gx += w * (y[2 * i] - y[2 * j]);
                    gy += w * (y[2 * i + 1] - y[2 * j + 1]);
                }
            }
            g[0] = 4.0 * gx;
            g[1] = 4.0 * gy;
        });
        for k in 0..2 * n {
            gains[k] = if (grad[k] > 0.0) != (update[k] > 0.0) {
                gains[k] + 0.2
            } else {
                (gains[k] * 0.8).max(MIN_GAIN)
            };
            update[k] = momentum * update[k] - config.learning_rate * gains[k] * grad[k];
            y[k] += update[k];
        }
        center(&mut y);
    }
    let final_kl = kl_divergence(&p, &y, n);
    Ok(TsneResult {
        coordinates: Tensor::matrix(n, 2, y)?,
        perplexity,
        entropies,
        initial_kl,
        final_kl,
    })
}
