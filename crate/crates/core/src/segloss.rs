//! Losses for training on labelled thick slices and unlabelled thin slices.
//!
//! The supervised term is pixel cross-entropy normalised by `H*W*C`. The
//! unsupervised term is the negative f-divergence between each pixel's
//! prediction and the uniform distribution, either KL (`f(x) = x ln x`) or
//! Pearson chi-square (`f(x) = x^2 - 1`, constant dropped). Minimising it
//! pushes thin-slice predictions away from uniform. Under chi-square the
//! gradient is linear in `p`; under KL it diverges as `p -> 0`.

use serde::Serialize;

use crate::error::{invalid, shape_err, Result};
use crate::numerics::{pairwise_sum, Tensor};

const SIMPLEX_TOLERANCE: f64 = 1e-6;

/// `H x W x C` per-pixel class probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMap(Tensor);

impl ProbMap {
    pub fn new(p: Tensor) -> Result<Self> {
        p.expect_rank(3, "probability map")?;
        let c = p.shape()[2];
        if p.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(invalid("probabilities must lie in [0, 1]"));
        }
        for (i, px) in p.data().chunks_exact(c).enumerate() {
            let s: f64 = px.iter().sum();
            if (s - 1.0).abs() > SIMPLEX_TOLERANCE {
                return Err(invalid(format!("pixel {i} sums to {s}, not 1")));
            }
        }
        Ok(Self(p))
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    fn dims(&self) -> (usize, usize) {
        let s = self.0.shape();
        (s[0] * s[1], s[2])
    }
}

/// `H x W x C` one-hot labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap(Tensor);

impl LabelMap {
    pub fn new(y: Tensor) -> Result<Self> {
        y.expect_rank(3, "label map")?;
        let c = y.shape()[2];
        for (i, px) in y.data().chunks_exact(c).enumerate() {
            let ones = px.iter().filter(|&&v| v == 1.0).count();
            if ones != 1 || px.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(invalid(format!("pixel {i} is not one-hot")));
            }
        }
        Ok(Self(y))
    }

    /// From an `H x W` map of class indices.
    pub fn from_indices(indices: &Tensor, classes: usize) -> Result<Self> {
        indices.expect_rank(2, "class index map")?;
        let mut data = vec![0.0; indices.len() * classes];
        for (p, &v) in indices.data().iter().enumerate() {
            if v < 0.0 || v.fract() != 0.0 || v as usize >= classes {
                return Err(invalid(format!("pixel {p} has class {v}, expected 0..{classes}")));
            }
            data[p * classes + v as usize] = 1.0;
        }
        Self::new(Tensor::new(vec![indices.rows(), indices.cols(), classes], data)?)
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Divergence {
    Kl,
    PearsonChi2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SegLossConfig {
    pub beta: f64,
    pub divergence: Divergence,
    pub clamp_eps: f64,
}

impl Default for SegLossConfig {
    fn default() -> Self {
        Self {
            beta: 1e-2,
            divergence: Divergence::PearsonChi2,
            clamp_eps: 1e-7,
        }
    }
}

/// `-(1 / HWC) sum y ln p` with `p` clamped below at `clamp_eps`.
pub fn supervised_loss(p_s: &ProbMap, y_s: &LabelMap, clamp_eps: f64) -> Result<f64> {
    if p_s.tensor().shape() != y_s.tensor().shape() {
        return Err(shape_err(format!(
            "prediction {:?} vs labels {:?}",
            p_s.tensor().shape(),
            y_s.tensor().shape()
        )));
    }
    let (hw, c) = p_s.dims();
    let terms: Vec<f64> = p_s
        .tensor()
        .data()
        .iter()
        .zip(y_s.tensor().data())
        .map(|(&p, &y)| if y == 0.0 { 0.0 } else { y * p.max(clamp_eps).ln() })
        .collect();
    Ok(-pairwise_sum(&terms) / (hw * c) as f64)
}

/// KL: `-(1 / HWC) sum f(C p)`, `f(x) = x ln x`.
/// Chi-square: `-(C / HW) sum p^2`.
pub fn uniform_divergence_loss(p_t: &ProbMap, divergence: Divergence, clamp_eps: f64) -> f64 {
    let (hw, c) = p_t.dims();
    let cf = c as f64;
    let data = p_t.tensor().data();
    match divergence {
        Divergence::Kl => {
            let terms: Vec<f64> = data
                .iter()
                .map(|&p| {
                    let x = cf * p.max(clamp_eps);
                    x * x.ln()
                })
                .collect();
            -pairwise_sum(&terms) / (hw * c) as f64
        }
        Divergence::PearsonChi2 => {
            let terms: Vec<f64> = data.iter().map(|&p| p * p).collect();
            -cf * pairwise_sum(&terms) / hw as f64
        }
    }
}

/// `L_S(p_s, y_s) + beta * L_T(p_t)`.
pub fn combined_loss(p_s: &ProbMap, y_s: &LabelMap, p_t: &ProbMap, config: &SegLossConfig) -> Result<f64> {
    if !(config.beta >= 0.0) {
        return Err(invalid("beta must be nonnegative"));
    }
    Ok(supervised_loss(p_s, y_s, config.clamp_eps)?
        + config.beta * uniform_divergence_loss(p_t, config.divergence, config.clamp_eps))
}

/// Elementwise derivative of [`uniform_divergence_loss`] with respect to `p_t`.
///
/// Chi-square: `-2 C p / HW`. KL: `-(ln(C p) + 1) / HW`.
pub fn divergence_gradient(p_t: &ProbMap, divergence: Divergence, clamp_eps: f64) -> Tensor {
    let (hw, c) = p_t.dims();
    let (cf, hwf) = (c as f64, hw as f64);
    let grad = |p: f64| match divergence {
        Divergence::PearsonChi2 => -2.0 * cf * p / hwf,
        Divergence::Kl => -((cf * p.max(clamp_eps)).ln() + 1.0) / hwf,
    };
    p_t.tensor().map(grad).expect("gradient of a valid map is finite")
}

/// Derivative of [`supervised_loss`] with respect to `p_s`.
pub fn supervised_gradient(p_s: &ProbMap, y_s: &LabelMap, clamp_eps: f64) -> Result<Tensor> {
    if p_s.tensor().shape() != y_s.tensor().shape() {
        return Err(shape_err("prediction and label shapes differ"));
    }
    let (hw, c) = p_s.dims();
    let n = (hw * c) as f64;
    let data = p_s
        .tensor()
        .data()
        .iter()
        .zip(y_s.tensor().data())
        .map(|(&p, &y)| if y == 0.0 || p < clamp_eps { 0.0 } else { -y / (p * n) })
        .collect();
    Tensor::new(p_s.tensor().shape().to_vec(), data)
}
