use serde::Serialize;

use crate::error::{invalid, Result, XaiError};
use crate::numerics::{weighted_least_squares_through_origin, SplitMix64, Tensor};
use crate::perturb::{
    BaselineMode, CoalitionValue, Explanation, ImageGame, Mask, Method, Predictor, SuperpixelMap,
};

/// Largest feature count accepted by [`exact_shapley`].
pub const EXACT_SHAPLEY_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShapConfig {
    /// Coalitions to evaluate besides the empty and full ones. At or above
    /// `2^M - 2` every proper coalition is enumerated instead of sampled.
    pub n_samples: usize,
    pub seed: u64,
    pub baseline: BaselineMode,
}

impl Default for ShapConfig {
    fn default() -> Self {
        Self {
            n_samples: 2048,
            seed: 0,
            baseline: BaselineMode::RegionMean,
        }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Shapley kernel `(M - 1) / (C(M, s) * s * (M - s))`.
///
/// `None` for `s = 0` and `s = M`: those coalitions are imposed as exact
/// constraints rather than weighted.
pub fn shapley_kernel_weight(m: usize, subset_size: usize) -> Option<f64> {
    if subset_size == 0 || subset_size >= m {
        return None;
    }
    let s = subset_size as f64;
    Some((m - 1) as f64 / (binomial(m, subset_size) * s * (m as f64 - s)))
}

fn proper_coalition_count(m: usize) -> Option<usize> {
    1usize.checked_shl(m as u32).filter(|_| m < usize::BITS as usize).map(|n| n - 2)
}

/// Kernel SHAP with the efficiency and baseline constraints eliminated
/// analytically before the weighted least-squares solve.
pub fn kernel_shap_game<G: CoalitionValue + ?Sized>(
    game: &mut G,
    m: usize,
    class_index: usize,
    config: &ShapConfig,
) -> Result<Explanation> {
    if m == 0 {
        return Err(invalid("need at least one superpixel"));
    }
    let base_value = game.values(&[Mask::empty(m)])?[0];
    let full_value = game.values(&[Mask::full(m)])?[0];
    let gap = full_value - base_value;
    let explanation = |weights: Vec<f64>, evaluations: usize| Explanation {
        method: Method::KernelShap,
        class_index,
        weights,
        intercept: base_value,
        base_value,
        full_value,
        evaluations,
    };
    if m == 1 {
        return Ok(explanation(vec![gap], 2));
    }

    let (masks, weights) = match proper_coalition_count(m) {
        Some(total) if config.n_samples >= total => enumerate_coalitions(m),
        _ => {
            if config.n_samples == 0 {
                return Err(invalid("n_samples must be positive"));
            }
            sample_coalitions(m, config.n_samples, config.seed)
        }
    };
    let values = game.values(&masks)?;

    // phi_last = gap - sum(others); regress on z_i - z_last
    let last = m - 1;
    let mut design = Vec::with_capacity(masks.len() * last);
    let mut target = Vec::with_capacity(masks.len());
    for (mask, v) in masks.iter().zip(&values) {
        let z_last = f64::from(u8::from(mask.get(last)));
        design.extend((0..last).map(|i| f64::from(u8::from(mask.get(i))) - z_last));
        target.push(v - base_value - z_last * gap);
    }
    let x = Tensor::matrix(masks.len(), last, design)?;
    let mut phi = weighted_least_squares_through_origin(&x, &target, &weights, 0.0)?;
    let rest: f64 = phi.iter().sum();
    phi.push(gap - rest);
    Ok(explanation(phi, masks.len() + 2))
}

fn enumerate_coalitions(m: usize) -> (Vec<Mask>, Vec<f64>) {
    let total = (1u64 << m) - 1;
    (1..total)
        .map(|bits| {
            let mask = Mask::from_bits(bits, m);
            let w = shapley_kernel_weight(m, mask.kept()).expect("proper coalition");
            (mask, w)
        })
        .unzip()
}

/// Sizes drawn proportionally to the total kernel mass of each size, members
/// uniformly within a size; every sample then carries unit weight.
fn sample_coalitions(m: usize, n: usize, seed: u64) -> (Vec<Mask>, Vec<f64>) {
    let mass: Vec<f64> = (1..m).map(|s| 1.0 / (s * (m - s)) as f64).collect();
    let total: f64 = mass.iter().sum();
    let mut rng = SplitMix64::new(seed);
    let mut order: Vec<usize> = (0..m).collect();
    let masks = (0..n)
        .map(|_| {
            let mut u = rng.next_f64() * total;
            let mut size = m - 1;
            for (i, w) in mass.iter().enumerate() {
                if u < *w {
                    size = i + 1;
                    break;
                }
                u -= w;
            }
            for i in 0..size {
                let j = i + rng.next_below((m - i) as u64) as usize;
                order.swap(i, j);
            }
            let mut keep = vec![false; m];
            order[..size].iter().for_each(|&i| keep[i] = true);
            Mask(keep)
        })
        .collect();
    (masks, vec![1.0; n])
}

/// Kernel SHAP attributions for `class_index` of `predictor` on `image`.
pub fn kernel_shap_explain<P: Predictor + ?Sized>(
    predictor: &mut P,
    image: &Tensor,
    spmap: &SuperpixelMap,
    class_index: usize,
    config: &ShapConfig,
) -> Result<Explanation> {
    let mut game = ImageGame::new(predictor, image, spmap, class_index, config.baseline)?;
    kernel_shap_game(&mut game, spmap.count(), class_index, config)
}

/// Shapley values by enumerating all `2^M` coalitions.
pub fn exact_shapley<G: CoalitionValue + ?Sized>(game: &mut G, m: usize) -> Result<Vec<f64>> {
    if m > EXACT_SHAPLEY_LIMIT {
        return Err(XaiError::OracleLimit {
            features: m,
            limit: EXACT_SHAPLEY_LIMIT,
        });
    }
    if m == 0 {
        return Err(invalid("need at least one feature"));
    }
    let masks: Vec<Mask> = (0..1u64 << m).map(|bits| Mask::from_bits(bits, m)).collect();
    let v = game.values(&masks)?;
    // |S|! (M - |S| - 1)! / M! = 1 / (M * C(M - 1, |S|))
    let coeff: Vec<f64> = (0..m).map(|s| 1.0 / (m as f64 * binomial(m - 1, s))).collect();
    let mut phi = vec![0.0; m];
    for (i, p) in phi.iter_mut().enumerate() {
        let bit = 1usize << i;
        for s in 0..1usize << m {
            if s & bit == 0 {
                *p += coeff[s.count_ones() as usize] * (v[s | bit] - v[s]);
            }
        }
    }
    Ok(phi)
}
