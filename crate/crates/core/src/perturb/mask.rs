use serde::Serialize;

use crate::error::{shape_err, Result};
use crate::numerics::{SplitMix64, Tensor};
use crate::perturb::SuperpixelMap;

/// Keep (`true`) / replace (`false`) flag per superpixel.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Mask(pub Vec<bool>);

impl Mask {
    pub fn full(m: usize) -> Self {
        Self(vec![true; m])
    }

    pub fn empty(m: usize) -> Self {
        Self(vec![false; m])
    }

    /// Bit `i` of `bits` keeps superpixel `i`.
    pub fn from_bits(bits: u64, m: usize) -> Self {
        Self((0..m).map(|i| bits >> i & 1 == 1).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn kept(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&b| f64::from(u8::from(b))).collect()
    }
}

/// Replacement values for dropped superpixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMode {
    /// Per-superpixel, per-channel mean of the original image.
    #[default]
    RegionMean,
    Zero,
}

/// `count x C` replacement values.
pub(crate) fn baseline_values(image: &Tensor, spmap: &SuperpixelMap, mode: BaselineMode) -> Vec<f64> {
    let c = image.shape()[2];
    let mut out = vec![0.0; spmap.count() * c];
    if mode == BaselineMode::Zero {
        return out;
    }
    let mut sizes = vec![0usize; spmap.count()];
    for (p, &label) in spmap.labels().iter().enumerate() {
        sizes[label] += 1;
        for ch in 0..c {
            out[label * c + ch] += image.data()[p * c + ch];
        }
    }
    for (label, &size) in sizes.iter().enumerate() {
        for ch in 0..c {
            out[label * c + ch] /= size as f64;
        }
    }
    out
}

pub(crate) fn check_image(image: &Tensor, spmap: &SuperpixelMap) -> Result<()> {
    image.expect_rank(3, "image")?;
    if image.shape()[0] != spmap.height() || image.shape()[1] != spmap.width() {
        return Err(shape_err(format!(
            "image {:?} does not match superpixel map {}x{}",
            image.shape(),
            spmap.height(),
            spmap.width()
        )));
    }
    Ok(())
}

pub(crate) fn write_masked(
    image: &Tensor,
    spmap: &SuperpixelMap,
    mask: &Mask,
    baseline: &[f64],
    out: &mut Vec<f64>,
) {
    let c = image.shape()[2];
    for (p, &label) in spmap.labels().iter().enumerate() {
        if mask.get(label) {
            out.extend_from_slice(&image.data()[p * c..(p + 1) * c]);
        } else {
            out.extend_from_slice(&baseline[label * c..(label + 1) * c]);
        }
    }
}

/// Copies kept superpixels from `image` and fills the rest from the baseline.
pub fn apply_mask(
    image: &Tensor,
    spmap: &SuperpixelMap,
    mask: &Mask,
    baseline: BaselineMode,
) -> Result<Tensor> {
    check_image(image, spmap)?;
    if mask.len() != spmap.count() {
        return Err(shape_err(format!(
            "mask of length {} for {} superpixels",
            mask.len(),
            spmap.count()
        )));
    }
    let values = baseline_values(image, spmap, baseline);
    let mut out = Vec::with_capacity(image.len());
    write_masked(image, spmap, mask, &values, &mut out);
    Tensor::new(image.shape().to_vec(), out)
}

/// `n` masks with each coordinate kept independently with probability 1/2,
/// drawn from a [`SplitMix64`] stream seeded with `seed`.
pub fn sample_masks(m: usize, n: usize, seed: u64) -> Vec<Mask> {
    let mut rng = SplitMix64::new(seed);
    (0..n)
        .map(|_| Mask((0..m).map(|_| rng.next_bool()).collect()))
        .collect()
}
