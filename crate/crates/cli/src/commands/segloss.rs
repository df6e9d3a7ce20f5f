use serde::Serialize;
use xaikit_core::segloss::{
    combined_loss, divergence_gradient, supervised_loss, uniform_divergence_loss, Divergence, LabelMap, ProbMap,
    SegLossConfig,
};
use xaikit_core::Tensor;

use super::{check_paths, load, Ctx};
use crate::cli::SeglossArgs;
use crate::error::{CliError, CliResult};
use crate::report::Report;

/// Largest second difference allowed for a "constant slope".
pub const LINEARITY_TOLERANCE: f64 = 1e-9;
/// Required ratio of KL gradient magnitude at `p = 1e-6` to that at `p = 0.5`.
pub const KL_RATIO_REQUIRED: f64 = 10.0;

#[derive(Debug, Serialize)]
pub struct BalanceCheck {
    pub chi2_max_second_difference: f64,
    pub kl_gradient_ratio: f64,
    pub passed: bool,
}

fn first_class_gradient(p: f64, divergence: Divergence, eps: f64) -> f64 {
    let t = Tensor::new(vec![1, 1, 2], vec![p, 1.0 - p]).expect("valid pixel");
    let map = ProbMap::new(t).expect("pixel on the simplex");
    divergence_gradient(&map, divergence, eps).data()[0]
}

/// Chi-square gradient is linear in `p`; the KL gradient blows up near 0.
pub fn gradient_balance(eps: f64) -> BalanceCheck {
    let grid: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
    let g: Vec<f64> = grid.iter().map(|&p| first_class_gradient(p, Divergence::PearsonChi2, eps)).collect();
    let chi2_max_second_difference = g
        .windows(3)
        .map(|w| (w[2] - 2.0 * w[1] + w[0]).abs())
        .fold(0.0, f64::max);
    let kl_gradient_ratio = first_class_gradient(1e-6, Divergence::Kl, eps).abs()
        / first_class_gradient(0.5, Divergence::Kl, eps).abs();
    BalanceCheck {
        chi2_max_second_difference,
        kl_gradient_ratio,
        passed: chi2_max_second_difference <= LINEARITY_TOLERANCE && kl_gradient_ratio >= KL_RATIO_REQUIRED,
    }
}

pub(super) fn run(ctx: &Ctx, a: &SeglossArgs) -> CliResult<()> {
    let inputs: Vec<&std::path::Path> = [&a.source_probs, &a.source_labels, &a.target_probs]
        .into_iter()
        .flatten()
        .map(|p| p.as_path())
        .collect();
    check_paths(&inputs, &[a.report.as_ref()])?;
    let config = SegLossConfig {
        beta: a.beta,
        divergence: a.divergence.into(),
        clamp_eps: a.clamp_eps,
    };
    let check = gradient_balance(a.clamp_eps);
    let mut report = Report::new("segloss-check", a);
    if let (Some(ps), Some(ys), Some(pt)) = (&a.source_probs, &a.source_labels, &a.target_probs) {
        let p_s = ProbMap::new(load(ps)?)?;
        let classes = p_s.tensor().shape()[2];
        let y_s = LabelMap::from_indices(&load(ys)?, classes)?;
        let p_t = ProbMap::new(load(pt)?)?;
        report
            .result("supervised_loss", supervised_loss(&p_s, &y_s, config.clamp_eps)?)
            .result(
                "divergence_loss",
                uniform_divergence_loss(&p_t, config.divergence, config.clamp_eps),
            )
            .result("combined_loss", combined_loss(&p_s, &y_s, &p_t, &config)?);
    }
    let passed = check.passed;
    report.result("gradient_balance", &check);
    ctx.finish(report, a.report.as_deref())?;
    if !passed {
        return Err(CliError::Check("gradient balance check failed".into()));
    }
    Ok(())
}
