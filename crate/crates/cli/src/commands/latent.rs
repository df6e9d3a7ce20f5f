use serde::Serialize;
use xaikit_core::latent::{evaluate_grid, fit_landscape, project_2d, tsne_embed, EmbeddingSet, GridBounds, TsneConfig};
use xaikit_core::XaiError;

use super::{check_paths, load, parse_f64, read_csv_columns, save, save_image, Ctx};
use crate::cli::{LandscapeArgs, TsneArgs};
use crate::error::CliResult;
use crate::report::Report;

pub(super) fn run_tsne(ctx: &Ctx, a: &TsneArgs) -> CliResult<()> {
    check_paths(&[&a.embeddings], &[Some(&a.out), a.report.as_ref()])?;
    let x = EmbeddingSet::new(load(&a.embeddings)?)?;
    let config = TsneConfig {
        perplexity: a.perplexity,
        iterations: a.iterations,
        learning_rate: a.learning_rate,
        seed: a.seed,
        ..TsneConfig::default()
    };
    let result = tsne_embed(&x, &config)?;
    save(&a.out, &result.coordinates)?;
    let target = result.perplexity.ln();
    let worst = result
        .entropies
        .iter()
        .map(|h| (h - target).abs())
        .fold(0.0, f64::max);
    let mut report = Report::new("tsne", a);
    report
        .result("points", x.len())
        .result("effective_perplexity", result.perplexity)
        .result("initial_kl", result.initial_kl)
        .result("final_kl", result.final_kl)
        .result("max_entropy_error", worst)
        .result("schedule", config);
    ctx.finish(report, a.report.as_deref())
}

#[derive(Serialize)]
struct Explained {
    explained_variance: Vec<f64>,
    explained_variance_ratio: Vec<f64>,
}

pub(super) fn run_landscape(ctx: &Ctx, a: &LandscapeArgs) -> CliResult<()> {
    check_paths(
        &[&a.embeddings, &a.dice],
        &[Some(&a.out), a.projection.as_ref(), a.image.as_ref(), a.report.as_ref()],
    )?;
    if !(a.margin >= 0.0) {
        return Err(XaiError::InvalidArgument("margin must be nonnegative".into()).into());
    }
    let x = EmbeddingSet::new(load(&a.embeddings)?)?;
    let column = read_csv_columns(&a.dice, &[a.dice_column.as_str()])?.remove(0);
    let dice = column
        .iter()
        .enumerate()
        .map(|(i, s)| parse_f64(&a.dice, i, s))
        .collect::<CliResult<Vec<f64>>>()?;
    if dice.len() != x.len() {
        return Err(XaiError::Shape(format!("{} Dice scores for {} embeddings", dice.len(), x.len())).into());
    }

    let (pca, y) = project_2d(&x)?;
    let fit = fit_landscape(&y, &dice, a.seed)?;
    let extent = |c: usize| {
        let (lo, hi) = (0..y.rows())
            .map(|r| y.row(r)[c])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let pad = a.margin * (hi - lo).max(1e-12);
        (lo - pad, hi + pad)
    };
    let ((y1_min, y1_max), (y2_min, y2_max)) = (extent(0), extent(1));
    let bounds = GridBounds { y1_min, y1_max, y2_min, y2_max };
    let grid = evaluate_grid(&fit.model, bounds, a.resolution)?;

    save(&a.out, &grid)?;
    if let Some(p) = &a.projection {
        save(p, &y)?;
    }
    if let Some(p) = &a.image {
        save_image(p, &grid, true)?;
    }
    let mut report = Report::new("landscape", a);
    report
        .result("points", x.len())
        .result(
            "pca",
            Explained {
                explained_variance: pca.explained_variance.clone(),
                explained_variance_ratio: pca.explained_variance_ratio(),
            },
        )
        .result("initial_mse", fit.initial_mse)
        .result("training_mse", fit.training_mse)
        .result("bounds", bounds)
        .result("grid_min", grid.data().iter().copied().fold(f64::INFINITY, f64::min))
        .result("grid_max", grid.data().iter().copied().fold(f64::NEG_INFINITY, f64::max));
    ctx.finish(report, a.report.as_deref())
}
