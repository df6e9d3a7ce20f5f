use std::time::Duration;

use xaikit_core::error::PredictorError;
use xaikit_core::perturb::{
    exact_shapley, grid_superpixels, kernel_shap_explain, lime_explain, CoalitionValue, Explanation, ImageGame,
    LimeConfig, Mask, Method, Predictor, ShapConfig, SuperpixelMap,
};
use xaikit_core::{Tensor, XaiError};

use super::{check_paths, load, save, save_image, unit_scale, Ctx};
use crate::cli::{ExplainArgs, LimeArgs, ShapArgs};
use crate::error::CliResult;
use crate::predictor::SubprocessPredictor;
use crate::report::Report;

/// Counts predictor invocations on the way through.
struct Counting<'a, P> {
    inner: &'a mut P,
    calls: usize,
}

impl<P: Predictor> Predictor for Counting<'_, P> {
    fn predict(&mut self, batch: &Tensor) -> Result<Tensor, PredictorError> {
        self.calls += 1;
        self.inner.predict(batch)
    }

    fn batch_limit(&self) -> usize {
        self.inner.batch_limit()
    }
}

struct Prepared {
    image: Tensor,
    spmap: SuperpixelMap,
}

fn prepare(a: &ExplainArgs) -> CliResult<Prepared> {
    let mut inputs = vec![a.image.as_path()];
    inputs.extend(a.segments.as_deref());
    check_paths(&inputs, &[a.weights_out.as_ref(), a.heatmap.as_ref(), a.color.as_ref(), a.report.as_ref()])?;
    let image = load(&a.image)?;
    let image = match image.shape() {
        &[h, w] => image.reshape(vec![h, w, 1])?,
        _ => image,
    };
    image.expect_rank(3, "image")?;
    let (h, w) = (image.shape()[0], image.shape()[1]);
    let spmap = match &a.segments {
        Some(p) => {
            let seg = load(p)?;
            if seg.shape() != [h, w] {
                return Err(XaiError::Shape(format!("segments {:?} do not match image {h} x {w}", seg.shape())).into());
            }
            let labels = seg
                .data()
                .iter()
                .map(|&v| {
                    if v >= 0.0 && v.fract() == 0.0 {
                        Ok(v as usize)
                    } else {
                        Err(XaiError::InvalidArgument(format!("segment label {v} is not a nonnegative integer")))
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            SuperpixelMap::from_labels(h, w, labels)?
        }
        None => grid_superpixels(h, w, a.superpixels)?,
    };
    Ok(Prepared { image, spmap })
}

fn spawn(a: &ExplainArgs) -> CliResult<SubprocessPredictor> {
    SubprocessPredictor::spawn(&a.predictor, a.batch_limit, Duration::from_secs(a.timeout_secs))
}

fn finish(
    ctx: &Ctx,
    a: &ExplainArgs,
    command: &'static str,
    config: &impl serde::Serialize,
    prep: &Prepared,
    explanation: &Explanation,
    calls: usize,
) -> CliResult<()> {
    let m = prep.spmap.count();
    if let Some(p) = &a.weights_out {
        save(p, &Tensor::new(vec![m], explanation.weights.clone())?)?;
    }
    if a.heatmap.is_some() || a.color.is_some() {
        let (h, w) = (prep.spmap.height(), prep.spmap.width());
        let per_pixel: Vec<f64> = prep.spmap.labels().iter().map(|&l| explanation.weights[l]).collect();
        let map = unit_scale(&Tensor::matrix(h, w, per_pixel)?);
        if let Some(p) = &a.heatmap {
            save_image(p, &map, false)?;
        }
        if let Some(p) = &a.color {
            save_image(p, &map, true)?;
        }
    }
    let mut report = Report::new(command, config);
    report
        .result("method", explanation.method)
        .result("class_index", explanation.class_index)
        .result("superpixels", m)
        .result("weights", &explanation.weights)
        .result("intercept", explanation.intercept)
        .result("base_value", explanation.base_value)
        .result("full_value", explanation.full_value)
        .result("evaluations", explanation.evaluations)
        .result("predictor_calls", calls);
    ctx.finish(report, a.report.as_deref())
}

pub(super) fn run_lime(ctx: &Ctx, a: &LimeArgs) -> CliResult<()> {
    let prep = prepare(&a.common)?;
    let config = LimeConfig {
        n_samples: a.common.samples.unwrap_or(LimeConfig::default().n_samples),
        seed: a.common.seed,
        kernel_width: a.kernel_width,
        baseline: a.common.baseline.into(),
        ..LimeConfig::default()
    };
    let mut child = spawn(&a.common)?;
    let mut counting = Counting { inner: &mut child, calls: 0 };
    let explanation = lime_explain(&mut counting, &prep.image, &prep.spmap, a.common.class, &config)?;
    let calls = counting.calls;
    child.finish()?;
    finish(ctx, &a.common, "lime", a, &prep, &explanation, calls)
}

pub(super) fn run_shap(ctx: &Ctx, a: &ShapArgs) -> CliResult<()> {
    let prep = prepare(&a.common)?;
    let mut child = spawn(&a.common)?;
    let mut counting = Counting { inner: &mut child, calls: 0 };
    let explanation = if a.exact {
        let m = prep.spmap.count();
        let mut game = ImageGame::new(
            &mut counting,
            &prep.image,
            &prep.spmap,
            a.common.class,
            a.common.baseline.into(),
        )?;
        let weights = exact_shapley(&mut game, m)?;
        let ends = game.values(&[Mask::empty(m), Mask::full(m)])?;
        Explanation {
            method: Method::ExactShapley,
            class_index: a.common.class,
            weights,
            intercept: ends[0],
            base_value: ends[0],
            full_value: ends[1],
            evaluations: 1usize << m,
        }
    } else {
        let config = ShapConfig {
            n_samples: a.common.samples.unwrap_or(ShapConfig::default().n_samples),
            seed: a.common.seed,
            baseline: a.common.baseline.into(),
        };
        kernel_shap_explain(&mut counting, &prep.image, &prep.spmap, a.common.class, &config)?
    };
    let calls = counting.calls;
    child.finish()?;
    finish(ctx, &a.common, "shap", a, &prep, &explanation, calls)
}
