use crate::error::{invalid, shape_err, Result};
use crate::numerics::Tensor;

/// Spatial mean of an `H x W x K` feature stack, one value per channel.
pub fn global_average_pool(features: &Tensor) -> Result<Vec<f64>> {
    features.expect_rank(3, "feature stack")?;
    let (h, w, k) = (features.shape()[0], features.shape()[1], features.shape()[2]);
    let mut sums = vec![0.0; k];
    for pixel in features.data().chunks_exact(k) {
        for (s, v) in sums.iter_mut().zip(pixel) {
            *s += v;
        }
    }
    let area = (h * w) as f64;
    Ok(sums.into_iter().map(|s| s / area).collect())
}

/// Sub-pixel rearrangement `H x W x (C*r*r)` -> `rH x rW x C`.
///
/// `out[r*i + a, r*j + b, c] = in[i, j, c*r*r + a*r + b]`.
pub fn pixel_shuffle(input: &Tensor, r: usize) -> Result<Tensor> {
    input.expect_rank(3, "pixel_shuffle input")?;
    if r == 0 {
        return Err(invalid("upscale factor must be positive"));
    }
    let (h, w, cr2) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let r2 = r * r;
    if cr2 % r2 != 0 {
        return Err(shape_err(format!(
            "channel extent {cr2} is not divisible by r^2 = {r2}"
        )));
    }
    let c = cr2 / r2;
    let (oh, ow) = (h * r, w * r);
    let src = input.data();
    let mut out = vec![0.0; src.len()];
    for i in 0..h {
        for j in 0..w {
            let base = (i * w + j) * cr2;
            for ch in 0..c {
                for a in 0..r {
                    for b in 0..r {
                        let dst = ((r * i + a) * ow + (r * j + b)) * c + ch;
                        out[dst] = src[base + ch * r2 + a * r + b];
                    }
                }
            }
        }
    }
    Tensor::new(vec![oh, ow, c], out)
}

/// Inverse of [`pixel_shuffle`]: `rH x rW x C` -> `H x W x (C*r*r)`.
pub fn pixel_unshuffle(input: &Tensor, r: usize) -> Result<Tensor> {
    input.expect_rank(3, "pixel_unshuffle input")?;
    if r == 0 {
        return Err(invalid("downscale factor must be positive"));
    }
    let (oh, ow, c) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    if oh % r != 0 || ow % r != 0 {
        return Err(shape_err(format!(
            "spatial extents {oh}x{ow} are not divisible by {r}"
        )));
    }
    let (h, w, r2) = (oh / r, ow / r, r * r);
    let cr2 = c * r2;
    let src = input.data();
    let mut out = vec![0.0; src.len()];
    for i in 0..h {
        for j in 0..w {
            let base = (i * w + j) * cr2;
            for ch in 0..c {
                for a in 0..r {
                    for b in 0..r {
                        out[base + ch * r2 + a * r + b] =
                            src[((r * i + a) * ow + (r * j + b)) * c + ch];
                    }
                }
            }
        }
    }
    Tensor::new(vec![h, w, cr2], out)
}
