//! Patient-level scoring from slice scores.
//!
//! Slices are grouped into consecutive sections, each section is scored by
//! the sigmoid of its k largest slice scores, and section probabilities are
//! fused by summing log-odds (equivalently `1 / (1 + prod(1/p - 1))`).
//! A per-image noise-transition head maps the clean posterior onto the
//! distribution of the noisy, patient-propagated image labels.
//!
//! Only the binary case is supported: class 0 is "negative", class 1 "positive".

use std::ops::Range;

use serde::Serialize;

use crate::error::{invalid, shape_err, Result, XaiError};
use crate::numerics::{logit, sigmoid, softmax, Tensor};

pub const NUM_CLASSES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MilConfig {
    pub section_len: usize,
    pub k: usize,
    pub lambda: f64,
    pub clamp_eps: f64,
}

impl Default for MilConfig {
    fn default() -> Self {
        Self {
            section_len: 16,
            k: 8,
            lambda: 1e-4,
            clamp_eps: 1e-7,
        }
    }
}

impl MilConfig {
    pub fn validate(&self) -> Result<()> {
        if self.section_len == 0 || self.k == 0 {
            return Err(invalid("section length and k must be positive"));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(invalid("lambda must be finite and nonnegative"));
        }
        if !(self.clamp_eps > 0.0 && self.clamp_eps < 0.5) {
            return Err(invalid("clamp_eps must lie in (0, 0.5)"));
        }
        Ok(())
    }
}

/// Pre-sigmoid class scores, one row per slice (`n x 2`).
#[derive(Debug, Clone, PartialEq)]
pub struct SliceScores(Tensor);

impl SliceScores {
    pub fn new(scores: Tensor) -> Result<Self> {
        scores.expect_rank(2, "slice scores")?;
        if scores.cols() != NUM_CLASSES {
            return Err(shape_err(format!(
                "slice scores need {NUM_CLASSES} columns, got {}",
                scores.cols()
            )));
        }
        Ok(Self(scores))
    }

    pub fn len(&self) -> usize {
        self.0.rows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, slice: usize, class: usize) -> f64 {
        self.0.data()[slice * NUM_CLASSES + class]
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    fn column(&self, class: usize, range: Range<usize>) -> Vec<f64> {
        range.map(|n| self.get(n, class)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SectionPartition {
    pub ranges: Vec<Range<usize>>,
    pub section_len: usize,
}

/// Splits `n` slices into `max(1, floor(n / section_len))` consecutive
/// sections; the last one absorbs the remainder.
pub fn partition_sections(n: usize, section_len: usize) -> Result<SectionPartition> {
    if n == 0 {
        return Err(XaiError::EmptyInput);
    }
    if section_len == 0 {
        return Err(invalid("section length must be positive"));
    }
    let count = (n / section_len).max(1);
    let ranges = (0..count)
        .map(|i| {
            let end = if i + 1 == count { n } else { (i + 1) * section_len };
            i * section_len..end
        })
        .collect();
    Ok(SectionPartition {
        ranges,
        section_len,
    })
}

/// Indices of the `min(k, len)` largest scores; ties go to the lower index.
pub fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(k.min(scores.len()));
    idx
}

/// `sigmoid(mean of the top-min(k, len) scores)`.
pub fn section_probability(scores: &[f64], k: usize) -> Result<f64> {
    if scores.is_empty() {
        return Err(XaiError::EmptyInput);
    }
    if k == 0 {
        return Err(invalid("k must be positive"));
    }
    let sel = top_k(scores, k);
    let mean = sel.iter().map(|&i| scores[i]).sum::<f64>() / sel.len() as f64;
    Ok(sigmoid(mean))
}

fn clamp(p: f64, eps: f64) -> f64 {
    p.clamp(eps, 1.0 - eps)
}

/// Noisy-OR fusion evaluated as a sum of log-odds.
pub fn patient_probability(section_probs: &[f64], clamp_eps: f64) -> Result<f64> {
    if section_probs.is_empty() {
        return Err(XaiError::EmptyInput);
    }
    let log_odds: f64 = section_probs.iter().map(|&p| logit(clamp(p, clamp_eps))).sum();
    Ok(sigmoid(log_odds))
}

/// Literal product form `1 / (1 + prod(1/p - 1))`, kept as a cross-check.
pub fn patient_probability_product(section_probs: &[f64], clamp_eps: f64) -> Result<f64> {
    if section_probs.is_empty() {
        return Err(XaiError::EmptyInput);
    }
    let odds_against: f64 = section_probs
        .iter()
        .map(|&p| 1.0 / clamp(p, clamp_eps) - 1.0)
        .product();
    Ok(1.0 / (1.0 + odds_against))
}

/// One-hot patient label over `{0, 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PatientLabel {
    class: usize,
}

impl PatientLabel {
    pub fn new(class: usize) -> Result<Self> {
        if class >= NUM_CLASSES {
            return Err(invalid(format!("label {class} is not 0 or 1")));
        }
        Ok(Self { class })
    }

    pub fn from_one_hot(y: [f64; 2]) -> Result<Self> {
        match y {
            [1.0, 0.0] => Self::new(0),
            [0.0, 1.0] => Self::new(1),
            _ => Err(invalid(format!("{y:?} is not one-hot"))),
        }
    }

    pub fn class(&self) -> usize {
        self.class
    }

    pub fn one_hot(&self) -> [f64; 2] {
        let mut y = [0.0; 2];
        y[self.class] = 1.0;
        y
    }
}

/// `-sum_c [y_c log P_c + (1 - y_c) log(1 - P_c)]` with clamped `P_c`.
pub fn classification_loss(patient_probs: [f64; 2], label: PatientLabel, clamp_eps: f64) -> f64 {
    let y = label.one_hot();
    (0..NUM_CLASSES)
        .map(|c| {
            let p = clamp(patient_probs[c], clamp_eps);
            -(y[c] * p.ln() + (1.0 - y[c]) * (1.0 - p).ln())
        })
        .sum()
}

/// Parameters `w^c_ij` (each `dim`-long) and `b^c_ij` of the transition head.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseHead {
    dim: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

const HEAD_SLOTS: usize = NUM_CLASSES * 2 * 2;

fn slot(c: usize, i: usize, j: usize) -> usize {
    (c * 2 + i) * 2 + j
}

impl NoiseHead {
    pub fn zeros(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("embedding dimension must be positive"));
        }
        Ok(Self {
            dim,
            weights: vec![0.0; HEAD_SLOTS * dim],
            biases: vec![0.0; HEAD_SLOTS],
        })
    }

    /// `weights` is laid out as `[c][i][j][dim]`, `biases` as `[c][i][j]`.
    pub fn new(dim: usize, weights: Vec<f64>, biases: Vec<f64>) -> Result<Self> {
        if dim == 0 || weights.len() != HEAD_SLOTS * dim || biases.len() != HEAD_SLOTS {
            return Err(shape_err(format!(
                "noise head needs {} weights and {HEAD_SLOTS} biases for dim {dim}",
                HEAD_SLOTS * dim
            )));
        }
        if weights.iter().chain(&biases).any(|v| !v.is_finite()) {
            return Err(invalid("noise head parameters must be finite"));
        }
        Ok(Self {
            dim,
            weights,
            biases,
        })
    }

    /// Reads a `2 x 2 x 2 x (dim + 1)` tensor whose last entry per slot is the bias.
    pub fn from_packed(t: &Tensor) -> Result<Self> {
        let s = t.shape();
        if s.len() != 4 || s[0] != 2 || s[1] != 2 || s[2] != 2 || s[3] < 2 {
            return Err(shape_err(format!(
                "packed noise head must be 2x2x2x(d+1), got {:?}",
                s
            )));
        }
        let dim = s[3] - 1;
        let mut weights = Vec::with_capacity(HEAD_SLOTS * dim);
        let mut biases = Vec::with_capacity(HEAD_SLOTS);
        for chunk in t.data().chunks_exact(dim + 1) {
            weights.extend_from_slice(&chunk[..dim]);
            biases.push(chunk[dim]);
        }
        Self::new(dim, weights, biases)
    }

    pub fn to_packed(&self) -> Tensor {
        let mut data = Vec::with_capacity(HEAD_SLOTS * (self.dim + 1));
        for s in 0..HEAD_SLOTS {
            data.extend_from_slice(&self.weights[s * self.dim..(s + 1) * self.dim]);
            data.push(self.biases[s]);
        }
        Tensor::new(vec![2, 2, 2, self.dim + 1], data).expect("packed layout is consistent")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn w(&self, c: usize, i: usize, j: usize) -> &[f64] {
        let s = slot(c, i, j);
        &self.weights[s * self.dim..(s + 1) * self.dim]
    }

    pub fn b(&self, c: usize, i: usize, j: usize) -> f64 {
        self.biases[slot(c, i, j)]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }
}

/// `Q[i][j] = P(noisy = i | true = j)`: softmax over `i` of
/// `w^c_ij . phi + b^c_ij`, so every column sums to one.
pub fn noise_transition(phi: &[f64], head: &NoiseHead, c: usize) -> Result<[[f64; 2]; 2]> {
    if phi.len() != head.dim() {
        return Err(shape_err(format!(
            "embedding of length {} for a head of dimension {}",
            phi.len(),
            head.dim()
        )));
    }
    if c >= NUM_CLASSES {
        return Err(invalid(format!("class {c} out of range")));
    }
    let mut q = [[0.0; 2]; 2];
    for j in 0..2 {
        let col = softmax(&[
            transition_score(phi, head, c, 0, j),
            transition_score(phi, head, c, 1, j),
        ])?;
        q[0][j] = col[0];
        q[1][j] = col[1];
    }
    Ok(q)
}

fn transition_score(phi: &[f64], head: &NoiseHead, c: usize, i: usize, j: usize) -> f64 {
    head.w(c, i, j).iter().zip(phi).map(|(w, x)| w * x).sum::<f64>() + head.b(c, i, j)
}

/// `P(z = i) = sum_j Q[i][j] P(y = j)`.
pub fn noisy_distribution(q: [[f64; 2]; 2], p_true: [f64; 2]) -> [f64; 2] {
    [
        q[0][0] * p_true[0] + q[0][1] * p_true[1],
        q[1][0] * p_true[0] + q[1][1] * p_true[1],
    ]
}

fn check_embeddings(scores: &SliceScores, embeddings: &Tensor, head: &NoiseHead) -> Result<()> {
    embeddings.expect_rank(2, "embeddings")?;
    if embeddings.rows() != scores.len() {
        return Err(shape_err(format!(
            "{} embeddings for {} slices",
            embeddings.rows(),
            scores.len()
        )));
    }
    if embeddings.cols() != head.dim() {
        return Err(shape_err(format!(
            "embeddings have dimension {}, head expects {}",
            embeddings.cols(),
            head.dim()
        )));
    }
    Ok(())
}

/// Noisy-label loss averaged over the slices of one patient.
///
/// The clean image posterior is `P(y_c = 1 | I_n) = sigmoid(s[n, c])` and every
/// slice inherits the patient label.
pub fn noisy_loss(
    scores: &SliceScores,
    embeddings: &Tensor,
    head: &NoiseHead,
    label: PatientLabel,
    config: &MilConfig,
) -> Result<f64> {
    check_embeddings(scores, embeddings, head)?;
    let y = label.one_hot();
    let n = scores.len();
    let mut total = 0.0;
    for img in 0..n {
        let phi = embeddings.row(img);
        for c in 0..NUM_CLASSES {
            let s = sigmoid(scores.get(img, c));
            let pz = noisy_distribution(noise_transition(phi, head, c)?, [1.0 - s, s]);
            total += y[c] * clamp(pz[1], config.clamp_eps).ln()
                + (1.0 - y[c]) * clamp(pz[0], config.clamp_eps).ln();
        }
    }
    Ok(-total / n as f64)
}

/// Per-class outputs of the section/patient pipeline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatientScore {
    pub partition: SectionPartition,
    /// `section_probs[c][i] = P(c | S_i)`.
    pub section_probs: [Vec<f64>; 2],
    /// Slice indices chosen by k-max, per class and section.
    pub selected: [Vec<Vec<usize>>; 2],
    pub patient_probs: [f64; 2],
}

pub fn score_patient(scores: &SliceScores, config: &MilConfig) -> Result<PatientScore> {
    config.validate()?;
    let partition = partition_sections(scores.len(), config.section_len)?;
    let mut section_probs: [Vec<f64>; 2] = Default::default();
    let mut selected: [Vec<Vec<usize>>; 2] = Default::default();
    let mut patient_probs = [0.0; 2];
    for c in 0..NUM_CLASSES {
        for range in &partition.ranges {
            let col = scores.column(c, range.clone());
            let sel = top_k(&col, config.k);
            let mean = sel.iter().map(|&i| col[i]).sum::<f64>() / sel.len() as f64;
            section_probs[c].push(sigmoid(mean));
            selected[c].push(sel.into_iter().map(|i| i + range.start).collect());
        }
        patient_probs[c] = patient_probability(&section_probs[c], config.clamp_eps)?;
    }
    Ok(PatientScore {
        partition,
        section_probs,
        selected,
        patient_probs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossBundle {
    pub l_cls: f64,
    pub l_noisy: f64,
    pub l_total: f64,
    /// `n x 2`, d(l_total)/d(slice score).
    pub grad_scores: Tensor,
    /// d(l_total)/d(head parameters), same layout as the head.
    pub grad_head: NoiseHead,
}

/// `l_total = l_cls + lambda * l_noisy` and its analytic gradient.
///
/// The k-max selection routes the classification gradient only to the
/// selected slices; clamped probabilities pass no gradient.
pub fn total_loss_with_gradients(
    scores: &SliceScores,
    embeddings: &Tensor,
    head: &NoiseHead,
    label: PatientLabel,
    config: &MilConfig,
) -> Result<LossBundle> {
    config.validate()?;
    check_embeddings(scores, embeddings, head)?;
    let eps = config.clamp_eps;
    let n = scores.len();
    let y = label.one_hot();
    let patient = score_patient(scores, config)?;

    let mut grad_scores = vec![0.0; n * NUM_CLASSES];
    let mut l_cls = 0.0;
    for c in 0..NUM_CLASSES {
        let p = patient.patient_probs[c];
        let pc = clamp(p, eps);
        l_cls -= y[c] * pc.ln() + (1.0 - y[c]) * (1.0 - pc).ln();
        if p <= eps || p >= 1.0 - eps {
            continue;
        }
        // dl/dP * dP/d(log-odds sum)
        let d_logodds = (-y[c] / p + (1.0 - y[c]) / (1.0 - p)) * p * (1.0 - p);
        for (sec, sel) in patient.selected[c].iter().enumerate() {
            let ps = patient.section_probs[c][sec];
            if ps <= eps || ps >= 1.0 - eps {
                continue;
            }
            let share = d_logodds / sel.len() as f64;
            for &slice in sel {
                grad_scores[slice * NUM_CLASSES + c] += share;
            }
        }
    }

    let mut grad_head = NoiseHead::zeros(head.dim())?;
    let mut l_noisy = 0.0;
    let inv_n = 1.0 / n as f64;
    for img in 0..n {
        let phi = embeddings.row(img);
        for c in 0..NUM_CLASSES {
            let s = sigmoid(scores.get(img, c));
            let p_true = [1.0 - s, s];
            let q = noise_transition(phi, head, c)?;
            let pz = noisy_distribution(q, p_true);
            let target = if y[c] == 1.0 { 1 } else { 0 };
            let pt = pz[target];
            l_noisy -= clamp(pt, eps).ln() * inv_n;
            if pt <= eps || pt >= 1.0 - eps {
                continue;
            }
            let mut g = [0.0; 2];
            g[target] = -inv_n / pt;

            let ds = s * (1.0 - s);
            let d_score: f64 = (0..2).map(|i| g[i] * (q[i][1] - q[i][0]) * ds).sum();
            grad_scores[img * NUM_CLASSES + c] += config.lambda * d_score;

            for j in 0..2 {
                let mix = g[0] * q[0][j] + g[1] * q[1][j];
                for i in 0..2 {
                    let d_t = config.lambda * p_true[j] * q[i][j] * (g[i] - mix);
                    let sl = slot(c, i, j);
                    grad_head.biases[sl] += d_t;
                    let w = &mut grad_head.weights[sl * head.dim()..(sl + 1) * head.dim()];
                    w.iter_mut().zip(phi).for_each(|(gw, x)| *gw += d_t * x);
                }
            }
        }
    }

    Ok(LossBundle {
        l_cls,
        l_noisy,
        l_total: l_cls + config.lambda * l_noisy,
        grad_scores: Tensor::matrix(n, NUM_CLASSES, grad_scores)?,
        grad_head,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SplitMix64;

    #[test]
    fn partition_examples() {
        assert_eq!(partition_sections(10, 16).unwrap().ranges, vec![0..10]);
        assert_eq!(partition_sections(32, 16).unwrap().ranges, vec![0..16, 16..32]);
        assert_eq!(partition_sections(35, 16).unwrap().ranges, vec![0..16, 16..35]);
        assert!(matches!(partition_sections(0, 16), Err(XaiError::EmptyInput)));
    }

    #[test]
    fn partition_covers_range() {
        for n in 1..100 {
            for ls in 1..20 {
                let p = partition_sections(n, ls).unwrap();
                assert_eq!(p.ranges.len(), (n / ls).max(1));
                assert_eq!(p.ranges[0].start, 0);
                assert_eq!(p.ranges.last().unwrap().end, n);
                for w in p.ranges.windows(2) {
                    assert_eq!(w[0].end, w[1].start);
                }
                assert!(p.ranges.iter().all(|r| !r.is_empty()));
            }
        }
    }

    #[test]
    fn section_probability_examples() {
        assert_eq!(section_probability(&[0.0], 8).unwrap(), 0.5);
        let p = section_probability(&[2.0, 1.0, 0.0, -1.0, -2.0], 2).unwrap();
        assert!((p - 0.817_574).abs() < 1e-6);
        for k in 1..6 {
            assert!((section_probability(&[0.3; 5], k).unwrap() - sigmoid(0.3)).abs() < 1e-15);
        }
    }

    #[test]
    fn top_k_breaks_ties_by_index() {
        assert_eq!(top_k(&[1.0, 3.0, 1.0, 3.0], 3), vec![1, 3, 0]);
    }

    #[test]
    fn patient_probability_examples() {
        let eps = 1e-7;
        assert!((patient_probability(&[0.7], eps).unwrap() - 0.7).abs() < 1e-12);
        assert!((patient_probability(&[0.5, 0.5], eps).unwrap() - 0.5).abs() < 1e-15);
        assert!((patient_probability(&[0.9, 0.8, 0.1], eps).unwrap() - 0.8).abs() < 1e-12);
        assert!(patient_probability(&[], eps).is_err());
        assert!(patient_probability_product(&[], eps).is_err());
    }

    #[test]
    fn aggregation_is_monotone() {
        let mut rng = SplitMix64::new(12);
        for _ in 0..1000 {
            let m = 1 + rng.next_below(6) as usize;
            let mut p: Vec<f64> = (0..m).map(|_| rng.uniform(0.01, 0.99)).collect();
            let before = patient_probability(&p, 1e-7).unwrap();
            let i = rng.next_below(m as u64) as usize;
            p[i] = rng.uniform(p[i], 0.999);
            assert!(patient_probability(&p, 1e-7).unwrap() >= before);
        }
    }

    #[test]
    fn saturated_section_dominates_when_others_lean_positive() {
        let eps = 1e-7;
        let mut rng = SplitMix64::new(13);
        for _ in 0..200 {
            let mut p: Vec<f64> = (0..4).map(|_| rng.uniform(0.5, 1.0)).collect();
            p[0] = 1.0 - eps;
            assert!(patient_probability(&p, eps).unwrap() >= 1.0 - eps - 1e-15);
        }
        // an opposing saturated section cancels it out
        assert!((patient_probability(&[1.0 - eps, eps], eps).unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn classification_loss_examples() {
        let pos = PatientLabel::new(1).unwrap();
        let l = classification_loss([0.3, 0.7], pos, 1e-7);
        assert!((l - 0.713_350).abs() < 1e-6);
        let l = classification_loss([0.5, 0.5], PatientLabel::new(0).unwrap(), 1e-7);
        assert!((l - 1.386_294).abs() < 1e-6);
        let mut last = f64::INFINITY;
        for eps in [1e-2, 1e-4, 1e-7] {
            let l = classification_loss([0.0, 1.0], pos, eps);
            assert!(l < last && l < 2.1 * eps);
            last = l;
        }
    }

    #[test]
    fn transition_examples() {
        let head = NoiseHead::zeros(3).unwrap();
        let q = noise_transition(&[0.1, 0.2, 0.3], &head, 0).unwrap();
        assert_eq!(q, [[0.5, 0.5], [0.5, 0.5]]);

        let mut head = NoiseHead::zeros(1).unwrap();
        head.biases_mut()[slot(1, 0, 0)] = 3f64.ln();
        let q = noise_transition(&[0.0], &head, 1).unwrap();
        assert!((q[0][0] - 0.75).abs() < 1e-15 && (q[1][0] - 0.25).abs() < 1e-15);
        assert!(noise_transition(&[0.0, 1.0], &head, 1).is_err());
    }

    #[test]
    fn transition_columns_sum_to_one() {
        let mut rng = SplitMix64::new(14);
        for _ in 0..1000 {
            let d = 1 + rng.next_below(8) as usize;
            let head = NoiseHead::new(
                d,
                (0..8 * d).map(|_| rng.normal() * 3.0).collect(),
                (0..8).map(|_| rng.normal()).collect(),
            )
            .unwrap();
            let phi: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
            for c in 0..2 {
                let q = noise_transition(&phi, &head, c).unwrap();
                for j in 0..2 {
                    assert!((q[0][j] + q[1][j] - 1.0).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn noisy_distribution_examples() {
        let id = [[1.0, 0.0], [0.0, 1.0]];
        assert_eq!(noisy_distribution(id, [0.3, 0.7]), [0.3, 0.7]);
        assert_eq!(noisy_distribution([[0.5; 2]; 2], [0.9, 0.1]), [0.5, 0.5]);
        let out = noisy_distribution([[0.75, 0.2], [0.25, 0.8]], [0.6, 0.4]);
        assert!((out[0] - 0.53).abs() < 1e-15 && (out[1] - 0.47).abs() < 1e-15);
    }

    fn scores(rows: &[[f64; 2]]) -> SliceScores {
        SliceScores::new(Tensor::matrix(rows.len(), 2, rows.concat()).unwrap()).unwrap()
    }

    #[test]
    fn noisy_loss_with_uniform_channel() {
        let cfg = MilConfig::default();
        let s = scores(&[[1.0, -2.0], [0.5, 3.0], [-1.0, 0.0]]);
        let e = Tensor::filled(vec![3, 2], 0.4).unwrap();
        let l = noisy_loss(&s, &e, &NoiseHead::zeros(2).unwrap(), PatientLabel::new(1).unwrap(), &cfg)
            .unwrap();
        assert!((l - 2.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn noisy_loss_single_image_value() {
        // sigmoid(0) = 0.5; biases give P(z=1) = 0.7 under both true labels
        let cfg = MilConfig::default();
        let mut head = NoiseHead::zeros(1).unwrap();
        for c in 0..2 {
            for j in 0..2 {
                head.biases_mut()[slot(c, 1, j)] = (0.7f64 / 0.3).ln();
            }
        }
        let l = noisy_loss(
            &scores(&[[0.0, 0.0]]),
            &Tensor::zeros(vec![1, 1]).unwrap(),
            &head,
            PatientLabel::new(1).unwrap(),
            &cfg,
        )
        .unwrap();
        assert!((l - 1.560_648).abs() < 1e-6);
    }

    #[test]
    fn noisy_loss_vanishes_for_clean_channel_and_confident_scores() {
        let cfg = MilConfig::default();
        let mut head = NoiseHead::zeros(1).unwrap();
        for c in 0..2 {
            for i in 0..2 {
                head.biases_mut()[slot(c, i, i)] = 60.0;
            }
        }
        let l = noisy_loss(
            &scores(&[[-40.0, 40.0], [-40.0, 40.0]]),
            &Tensor::zeros(vec![2, 1]).unwrap(),
            &head,
            PatientLabel::new(1).unwrap(),
            &cfg,
        )
        .unwrap();
        // the upper clamp caps each log term at ln(1 - eps)
        assert!((0.0..2.0 * 1.0001e-7).contains(&l));
    }

    #[test]
    fn lambda_zero_decouples_head() {
        let mut rng = SplitMix64::new(15);
        let cfg = MilConfig { lambda: 0.0, ..MilConfig::default() };
        let s = SliceScores::new(Tensor::from_fn(vec![20, 2], |_| rng.normal()).unwrap()).unwrap();
        let e = Tensor::from_fn(vec![20, 3], |_| rng.normal()).unwrap();
        let head = NoiseHead::new(3, (0..24).map(|_| rng.normal()).collect(), vec![0.1; 8]).unwrap();
        let b = total_loss_with_gradients(&s, &e, &head, PatientLabel::new(0).unwrap(), &cfg).unwrap();
        assert_eq!(b.l_total, b.l_cls);
        assert!(b.grad_head.weights().iter().chain(b.grad_head.biases()).all(|&g| g == 0.0));
    }

    #[test]
    fn unselected_slices_get_no_classification_gradient() {
        let mut rng = SplitMix64::new(16);
        let cfg = MilConfig { lambda: 0.0, ..MilConfig::default() };
        let s = SliceScores::new(Tensor::from_fn(vec![40, 2], |_| rng.normal()).unwrap()).unwrap();
        let e = Tensor::zeros(vec![40, 1]).unwrap();
        let b = total_loss_with_gradients(&s, &e, &NoiseHead::zeros(1).unwrap(), PatientLabel::new(1).unwrap(), &cfg)
            .unwrap();
        let ps = score_patient(&s, &cfg).unwrap();
        for c in 0..2 {
            let chosen: Vec<usize> = ps.selected[c].iter().flatten().copied().collect();
            assert_eq!(chosen.len(), 16);
            for n in 0..40 {
                let g = b.grad_scores.get(&[n, c]).unwrap();
                assert_eq!(g == 0.0, !chosen.contains(&n));
            }
        }
    }

    #[test]
    fn packed_head_roundtrip() {
        let head = NoiseHead::new(2, (0..16).map(f64::from).collect(), (0..8).map(|v| -f64::from(v)).collect()).unwrap();
        let packed = head.to_packed();
        assert_eq!(packed.shape(), &[2, 2, 2, 3]);
        assert_eq!(NoiseHead::from_packed(&packed).unwrap(), head);
        assert_eq!(head.w(1, 0, 1), &[10.0, 11.0]);
        assert_eq!(head.b(1, 0, 1), -5.0);
    }
}
