use xaikit_core::mil::{
    classification_loss, score_patient, total_loss_with_gradients, MilConfig, NoiseHead, PatientLabel, SliceScores,
};

use super::{check_paths, load, save, Ctx};
use crate::cli::MilArgs;
use crate::error::CliResult;
use crate::report::Report;

pub(super) fn run(ctx: &Ctx, a: &MilArgs) -> CliResult<()> {
    let mut inputs = vec![a.scores.as_path()];
    inputs.extend(a.embeddings.as_deref());
    inputs.extend(a.head.as_deref());
    check_paths(&inputs, &[a.grad.as_ref(), a.report.as_ref()])?;

    let config = MilConfig {
        section_len: a.section_len,
        k: a.k,
        lambda: a.lambda,
        clamp_eps: a.clamp_eps,
    };
    config.validate()?;
    let label = PatientLabel::new(a.label)?;
    let scores = SliceScores::new(load(&a.scores)?)?;
    let patient = score_patient(&scores, &config)?;

    let mut report = Report::new("mil", a);
    report
        .result("patient_probabilities", patient.patient_probs)
        .result("section_probabilities", &patient.section_probs)
        .result("selected_slices", &patient.selected)
        .result("sections", patient.partition.ranges.len());

    if let (Some(e), Some(h)) = (&a.embeddings, &a.head) {
        let embeddings = load(e)?;
        let head = NoiseHead::from_packed(&load(h)?)?;
        let bundle = total_loss_with_gradients(&scores, &embeddings, &head, label, &config)?;
        report
            .result("l_cls", bundle.l_cls)
            .result("l_noisy", bundle.l_noisy)
            .result("l_total", bundle.l_total);
        if let Some(g) = &a.grad {
            save(g, &bundle.grad_scores)?;
        }
    } else {
        report.result("l_cls", classification_loss(patient.patient_probs, label, config.clamp_eps));
    }
    ctx.finish(report, a.report.as_deref())
}
