use serde::Serialize;

use crate::error::{invalid, Result};
use crate::numerics::{weighted_least_squares, Tensor};
use crate::perturb::{
    sample_masks, BaselineMode, CoalitionValue, Explanation, ImageGame, Mask, Method, Predictor,
    SuperpixelMap,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimeConfig {
    pub n_samples: usize,
    pub seed: u64,
    pub kernel_width: f64,
    pub ridge: f64,
    pub baseline: BaselineMode,
}

impl Default for LimeConfig {
    fn default() -> Self {
        Self {
            n_samples: 1000,
            seed: 0,
            kernel_width: 0.25,
            ridge: 1e-6,
            baseline: BaselineMode::RegionMean,
        }
    }
}

/// `exp(-(1 - sqrt(kept / M))^2 / width^2)`: an exponential kernel on the
/// cosine distance between the mask and the all-kept mask.
pub fn proximity_weight(mask: &Mask, kernel_width: f64) -> f64 {
    let m = mask.len() as f64;
    let distance = 1.0 - (mask.kept() as f64 / m).sqrt();
    (-(distance * distance) / (kernel_width * kernel_width)).exp()
}

/// LIME surrogate over an arbitrary coalition function.
///
/// The full and empty coalitions are evaluated first (one call each), then the
/// sampled masks; all of them enter the weighted ridge fit.
pub fn lime_explain_game<G: CoalitionValue + ?Sized>(
    game: &mut G,
    m: usize,
    class_index: usize,
    config: &LimeConfig,
) -> Result<Explanation> {
    let identity: Vec<usize> = (0..m).collect();
    fit(game, &identity, class_index, config)
}

/// `order[k]` is the feature that receives the `k`-th sampled coordinate.
fn fit<G: CoalitionValue + ?Sized>(
    game: &mut G,
    order: &[usize],
    class_index: usize,
    config: &LimeConfig,
) -> Result<Explanation> {
    let m = order.len();
    if m == 0 {
        return Err(invalid("need at least one superpixel"));
    }
    if config.n_samples == 0 {
        return Err(invalid("n_samples must be positive"));
    }
    if !(config.kernel_width > 0.0) {
        return Err(invalid("kernel width must be positive"));
    }
    let full_value = game.values(&[Mask::full(m)])?[0];
    let base_value = game.values(&[Mask::empty(m)])?[0];
    let samples: Vec<Mask> = sample_masks(m, config.n_samples, config.seed)
        .into_iter()
        .map(|z| {
            let mut bits = vec![false; m];
            for (k, &feature) in order.iter().enumerate() {
                bits[feature] = z.get(k);
            }
            Mask(bits)
        })
        .collect();
    let sampled_values = game.values(&samples)?;

    let mut masks = Vec::with_capacity(samples.len() + 2);
    masks.push(Mask::full(m));
    masks.push(Mask::empty(m));
    masks.extend(samples);
    let mut y = vec![full_value, base_value];
    y.extend(sampled_values);

    let x = Tensor::matrix(masks.len(), m, masks.iter().flat_map(Mask::to_f64).collect())?;
    let w: Vec<f64> = masks.iter().map(|z| proximity_weight(z, config.kernel_width)).collect();
    let fit = weighted_least_squares(&x, &y, &w, config.ridge)?;
    Ok(Explanation {
        method: Method::Lime,
        class_index,
        weights: fit.coefficients,
        intercept: fit.intercept,
        base_value,
        full_value,
        evaluations: masks.len(),
    })
}

/// LIME attributions for `class_index` of `predictor` on `image`.
///
/// Mask coordinates are drawn per region in raster order of each region's
/// first pixel, so renumbering the superpixels only permutes the result.
pub fn lime_explain<P: Predictor + ?Sized>(
    predictor: &mut P,
    image: &Tensor,
    spmap: &SuperpixelMap,
    class_index: usize,
    config: &LimeConfig,
) -> Result<Explanation> {
    let mut game = ImageGame::new(predictor, image, spmap, class_index, config.baseline)?;
    fit(&mut game, &spmap.raster_order(), class_index, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SplitMix64;
    use crate::perturb::{grid_superpixels, FnPredictor, FnValue};

    #[test]
    fn kernel_values() {
        assert_eq!(proximity_weight(&Mask::full(4), 0.25), 1.0);
        let half = Mask(vec![true, true, false, false]);
        let d = 1.0 - 0.5f64.sqrt();
        assert!((proximity_weight(&half, 0.25) - (-d * d / 0.0625).exp()).abs() < 1e-15);
    }

    #[test]
    fn count_only_predictor_gives_equal_weights() {
        let m = 6;
        let mut game = FnValue(|z: &Mask| z.kept() as f64 / m as f64);
        let e = lime_explain_game(&mut game, m, 0, &LimeConfig::default()).unwrap();
        for w in &e.weights {
            assert!((w - e.weights[0]).abs() < 1e-6);
        }
    }

    #[test]
    fn single_feature_recovery() {
        let cfg = LimeConfig { n_samples: 2048, ..LimeConfig::default() };
        let mut game = FnValue(|z: &Mask| if z.get(1) { 1.0 } else { 0.0 });
        let e = lime_explain_game(&mut game, 10, 0, &cfg).unwrap();
        assert!((e.weights[1] - 1.0).abs() < 0.05);
        for (i, w) in e.weights.iter().enumerate().filter(|(i, _)| *i != 1) {
            assert!(w.abs() < 0.05, "weight {i} = {w}");
        }
    }

    #[test]
    fn constant_predictor_has_zero_weights() {
        let mut game = FnValue(|_: &Mask| 0.37);
        let e = lime_explain_game(&mut game, 5, 0, &LimeConfig::default()).unwrap();
        assert!(e.weights.iter().all(|w| w.abs() < 1e-9));
        assert!((e.intercept - 0.37).abs() < 1e-9);
    }

    #[test]
    fn relabelling_permutes_attributions() {
        let img = Tensor::filled(vec![6, 6, 1], 1.0).unwrap();
        let sp = grid_superpixels(6, 6, 9).unwrap();
        let coef: Vec<f64> = (0..9).map(|i| (i as f64 - 4.0) * 0.3).collect();
        // linear in the kept-pixel fraction of each region
        let make = |spmap: &SuperpixelMap, coef: Vec<f64>| {
            let labels = spmap.labels().to_vec();
            let mut pred = FnPredictor::new(move |b: &Tensor| {
                let px = labels.len();
                let rows: Vec<f64> = (0..b.shape()[0])
                    .map(|r| {
                        let mut sums = vec![0.0; coef.len()];
                        let mut sizes = vec![0.0; coef.len()];
                        for p in 0..px {
                            sums[labels[p]] += b.data()[r * px + p];
                            sizes[labels[p]] += 1.0;
                        }
                        (0..coef.len()).map(|i| coef[i] * sums[i] / sizes[i]).sum()
                    })
                    .collect();
                Ok(Tensor::matrix(rows.len(), 1, rows).unwrap())
            });
            let cfg = LimeConfig { baseline: BaselineMode::Zero, n_samples: 300, ..LimeConfig::default() };
            lime_explain(&mut pred, &img, spmap, 0, &cfg).unwrap()
        };
        let base = make(&sp, coef.clone());
        let mut rng = SplitMix64::new(3);
        let mut perm: Vec<usize> = (0..9).collect();
        for i in (1..9).rev() {
            perm.swap(i, rng.next_below(i as u64 + 1) as usize);
        }
        let relabelled = sp.relabel(&perm).unwrap();
        let mut permuted_coef = vec![0.0; 9];
        for (old, &new) in perm.iter().enumerate() {
            permuted_coef[new] = coef[old];
        }
        let other = make(&relabelled, permuted_coef);
        for (old, &new) in perm.iter().enumerate() {
            assert!((base.weights[old] - other.weights[new]).abs() < 1e-9);
        }
    }
}
