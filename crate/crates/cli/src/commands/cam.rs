use xaikit_core::edm::{
    activation_map, class_scores, extract_boxes, normalize_map, upsample_nearest, ClassifierHead, FeatureStack,
};

use super::{check_paths, load, save_image, Ctx};
use crate::cli::CamArgs;
use crate::error::{CliError, CliResult};
use crate::report::Report;

pub(super) fn run(ctx: &Ctx, a: &CamArgs) -> CliResult<()> {
    check_paths(
        &[&a.features, &a.weights],
        &[Some(&a.out), a.color.as_ref(), a.boxes.as_ref(), a.report.as_ref()],
    )?;
    let features = FeatureStack::new(load(&a.features)?)?;
    let head = ClassifierHead::new(load(&a.weights)?)?;
    let scores = class_scores(&features, &head)?;
    let saliency = activation_map(&features, &head, a.class)?;
    let heat = upsample_nearest(&normalize_map(&saliency), a.upsample)?;
    let boxes = extract_boxes(&heat, a.threshold)?;

    save_image(&a.out, &heat, false)?;
    if let Some(p) = &a.color {
        save_image(p, &heat, true)?;
    }
    if let Some(p) = &a.boxes {
        let mut text = serde_json::to_string_pretty(&boxes).expect("boxes serialize");
        text.push('\n');
        std::fs::write(p, text).map_err(|e| CliError::io(p, e))?;
    }

    let raw = saliency.map.data();
    let mut report = Report::new("cam", a);
    report
        .result("class_scores", &scores)
        .result("class_index", a.class)
        .result("map_mean", raw.iter().sum::<f64>() / raw.len() as f64)
        .result("map_min", raw.iter().copied().fold(f64::INFINITY, f64::min))
        .result("map_max", raw.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .result("heatmap_shape", heat.shape())
        .result("box_count", boxes.len());
    for b in &boxes {
        report.item(b);
    }
    ctx.finish(report, a.report.as_deref())
}
