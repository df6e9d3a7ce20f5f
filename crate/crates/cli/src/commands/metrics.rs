use xaikit_core::metrics::{confusion_metrics, dice_score, max_accuracy_threshold, pr_curve, roc_auc, ScoredLabels};
use xaikit_core::XaiError;

use super::{check_paths, load, parse_f64, read_csv_columns, write_csv, Ctx};
use crate::cli::MetricsArgs;
use crate::error::{CliError, CliResult};
use crate::report::Report;

fn parse_label(path: &std::path::Path, row: usize, s: &str) -> CliResult<bool> {
    match s {
        "1" | "1.0" | "true" | "True" => Ok(true),
        "0" | "0.0" | "false" | "False" => Ok(false),
        _ => Err(CliError::Table {
            path: path.to_path_buf(),
            message: format!("row {}: label {s:?} is not 0 or 1", row + 1),
        }),
    }
}

pub(super) fn run(ctx: &Ctx, a: &MetricsArgs) -> CliResult<()> {
    let mut inputs = vec![a.input.as_path()];
    inputs.extend(a.pred_mask.as_deref());
    inputs.extend(a.true_mask.as_deref());
    check_paths(&inputs, &[a.roc.as_ref(), a.pr.as_ref(), a.report.as_ref()])?;

    let mut cols = read_csv_columns(&a.input, &[a.score_column.as_str(), a.label_column.as_str()])?;
    let labels = cols
        .pop()
        .expect("two columns")
        .iter()
        .enumerate()
        .map(|(i, s)| parse_label(&a.input, i, s))
        .collect::<CliResult<Vec<_>>>()?;
    let scores = cols
        .pop()
        .expect("two columns")
        .iter()
        .enumerate()
        .map(|(i, s)| parse_f64(&a.input, i, s))
        .collect::<CliResult<Vec<_>>>()?;
    let data = ScoredLabels::new(scores, labels)?;

    let roc = roc_auc(&data)?;
    let pr = pr_curve(&data)?;
    if let Some(p) = &a.roc {
        write_csv(p, &roc.points)?;
    }
    if let Some(p) = &a.pr {
        write_csv(p, &pr.points)?;
    }
    let mut report = Report::new("metrics", a);
    report
        .result("n", data.scores().len())
        .result("positives", data.positives())
        .result("auc", roc.auc)
        .result("average_precision", pr.average_precision)
        .result("at_threshold", confusion_metrics(&data, a.threshold))
        .result("best_accuracy", max_accuracy_threshold(&data));

    if let (Some(pm), Some(tm)) = (&a.pred_mask, &a.true_mask) {
        let (p, t) = (load(pm)?, load(tm)?);
        if p.shape() != t.shape() {
            return Err(XaiError::Shape(format!("masks {:?} and {:?}", p.shape(), t.shape())).into());
        }
        let fg = |v: &f64| *v > 0.5;
        let p: Vec<bool> = p.data().iter().map(fg).collect();
        let t: Vec<bool> = t.data().iter().map(fg).collect();
        report.result("dice", dice_score(&p, &t)?);
    }
    ctx.finish(report, a.report.as_deref())
}
