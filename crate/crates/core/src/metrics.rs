//! Ranking and overlap metrics.
//!
//! Ties get half credit in AUC, and threshold rules predict positive when
//! `score >= threshold`.

use serde::Serialize;

use crate::error::{shape_err, Result, XaiError};

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredLabels {
    scores: Vec<f64>,
    labels: Vec<bool>,
}

impl ScoredLabels {
    pub fn new(scores: Vec<f64>, labels: Vec<bool>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(shape_err(format!(
                "{} scores but {} labels",
                scores.len(),
                labels.len()
            )));
        }
        if scores.is_empty() {
            return Err(XaiError::EmptyInput);
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(XaiError::InvalidArgument("scores must be finite".into()));
        }
        Ok(Self { scores, labels })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    pub fn negatives(&self) -> usize {
        self.labels.len() - self.positives()
    }

    /// `(threshold, cumulative tp, cumulative fp)` at each distinct score, descending.
    fn sweep(&self) -> Vec<(f64, usize, usize)> {
        let mut order: Vec<usize> = (0..self.scores.len()).collect();
        order.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]));
        let mut out: Vec<(f64, usize, usize)> = Vec::new();
        let (mut tp, mut fp) = (0, 0);
        for (pos, &i) in order.iter().enumerate() {
            if self.labels[i] {
                tp += 1;
            } else {
                fp += 1;
            }
            let next_differs = order
                .get(pos + 1)
                .is_none_or(|&j| self.scores[j] != self.scores[i]);
            if next_differs {
                out.push((self.scores[i], tp, fp));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocCurve {
    /// Starts at `(0, 0)` (threshold `+inf`), ends at `(1, 1)`.
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// ROC curve and trapezoidal AUC.
///
/// The trapezoid area is accumulated in integer pair counts, so it is bit
/// for bit the Mann-Whitney statistic with half credit for ties.
pub fn roc_auc(d: &ScoredLabels) -> Result<RocCurve> {
    let (p, n) = (d.positives(), d.negatives());
    if p == 0 || n == 0 {
        return Err(XaiError::UndefinedAuc("both classes must be present"));
    }
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    // twice the area, in units of (1/P) * (1/N)
    let mut doubled: u128 = 0;
    let (mut prev_tp, mut prev_fp) = (0usize, 0usize);
    for (threshold, tp, fp) in d.sweep() {
        doubled += ((fp - prev_fp) * (tp + prev_tp)) as u128;
        points.push(RocPoint {
            threshold,
            fpr: fp as f64 / n as f64,
            tpr: tp as f64 / p as f64,
        });
        prev_tp = tp;
        prev_fp = fp;
    }
    Ok(RocCurve {
        points,
        auc: doubled as f64 / (2 * p * n) as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
    pub average_precision: f64,
}

/// Precision/recall at each distinct threshold (descending) and
/// `AP = sum (R_k - R_{k-1}) P_k`.
pub fn pr_curve(d: &ScoredLabels) -> Result<PrCurve> {
    let p = d.positives();
    if p == 0 {
        return Err(XaiError::InvalidArgument(
            "precision-recall needs at least one positive".into(),
        ));
    }
    let mut points = Vec::new();
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (threshold, tp, fp) in d.sweep() {
        let precision = tp as f64 / (tp + fp) as f64;
        let recall = tp as f64 / p as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        points.push(PrPoint {
            threshold,
            precision,
            recall,
        });
    }
    Ok(PrCurve {
        points,
        average_precision: ap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Ratios are `None` when their denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfusionReport {
    pub threshold: f64,
    pub counts: ConfusionCounts,
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl ConfusionReport {
    pub fn from_counts(threshold: f64, counts: ConfusionCounts) -> Self {
        let ConfusionCounts { tp, fp, tn, fn_ } = counts;
        Self {
            threshold,
            counts,
            accuracy: ratio(tp + tn, counts.total()),
            precision: ratio(tp, tp + fp),
            sensitivity: ratio(tp, tp + fn_),
            specificity: ratio(tn, tn + fp),
        }
    }
}

pub fn confusion_metrics(d: &ScoredLabels, threshold: f64) -> ConfusionReport {
    let mut c = ConfusionCounts {
        tp: 0,
        fp: 0,
        tn: 0,
        fn_: 0,
    };
    for (&s, &l) in d.scores.iter().zip(&d.labels) {
        match (s >= threshold, l) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    ConfusionReport::from_counts(threshold, c)
}

/// Threshold among the observed scores with the highest accuracy (the
/// largest such threshold on ties), plus `+inf` (predict all negative).
pub fn max_accuracy_threshold(d: &ScoredLabels) -> ConfusionReport {
    let mut best = confusion_metrics(d, f64::INFINITY);
    for (threshold, _, _) in d.sweep() {
        let candidate = confusion_metrics(d, threshold);
        if candidate.accuracy > best.accuracy {
            best = candidate;
        }
    }
    best
}

/// `2 |a & b| / (|a| + |b|)`; two empty masks score 1.
pub fn dice_score(a: &[bool], b: &[bool]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(shape_err(format!("masks of length {} and {}", a.len(), b.len())));
    }
    let inter = a.iter().zip(b).filter(|(x, y)| **x && **y).count();
    let total = a.iter().filter(|&&x| x).count() + b.iter().filter(|&&x| x).count();
    if total == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / total as f64)
}
