//! Class activation maps and lesion boxes.
//!
//! With a global-average-pooled feature stack followed by a linear head, the
//! class score is the spatial mean of the activation map, so the map can be
//! read directly as the per-location contribution to the score.

use serde::Serialize;

use crate::error::{invalid, shape_err, Result};
use crate::numerics::{global_average_pool, Tensor};

/// Default binarisation threshold on the normalised heatmap.
pub const DEFAULT_BOX_THRESHOLD: f64 = 0.6;

/// `H' x W' x K` backbone feature maps.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack(Tensor);

impl FeatureStack {
    pub fn new(features: Tensor) -> Result<Self> {
        features.expect_rank(3, "feature stack")?;
        Ok(Self(features))
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn height(&self) -> usize {
        self.0.shape()[0]
    }

    pub fn width(&self) -> usize {
        self.0.shape()[1]
    }

    pub fn channels(&self) -> usize {
        self.0.shape()[2]
    }
}

/// `K x C` weights of the final linear (or 1x1 convolution) layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead(Tensor);

impl ClassifierHead {
    pub fn new(weights: Tensor) -> Result<Self> {
        weights.expect_rank(2, "classifier head")?;
        Ok(Self(weights))
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn channels(&self) -> usize {
        self.0.rows()
    }

    pub fn classes(&self) -> usize {
        self.0.cols()
    }

    fn weight(&self, k: usize, c: usize) -> f64 {
        self.0.data()[k * self.classes() + c]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SaliencyMap {
    /// `H' x W'` activation map.
    pub map: Tensor,
    pub class_index: usize,
}

/// Inclusive pixel box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BoundingBox {
    pub row_min: usize,
    pub col_min: usize,
    pub row_max: usize,
    pub col_max: usize,
}

impl BoundingBox {
    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.row_min..=self.row_max).contains(&row) && (self.col_min..=self.col_max).contains(&col)
    }
}

/// A box together with the size of the component it was drawn around.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LesionBox {
    #[serde(flatten)]
    pub bounds: BoundingBox,
    pub pixel_count: usize,
}

fn check_pair(features: &FeatureStack, head: &ClassifierHead) -> Result<()> {
    if features.channels() != head.channels() {
        return Err(shape_err(format!(
            "feature stack has {} channels but head expects {}",
            features.channels(),
            head.channels()
        )));
    }
    Ok(())
}

/// `s_c = sum_k W[k, c] * GAP(F)[k]`.
pub fn class_scores(features: &FeatureStack, head: &ClassifierHead) -> Result<Vec<f64>> {
    check_pair(features, head)?;
    let pooled = global_average_pool(features.tensor())?;
    Ok((0..head.classes())
        .map(|c| pooled.iter().enumerate().map(|(k, g)| head.weight(k, c) * g).sum())
        .collect())
}

/// `A[i, j] = sum_k W[k, c] * F[i, j, k]`.
pub fn activation_map(
    features: &FeatureStack,
    head: &ClassifierHead,
    class_index: usize,
) -> Result<SaliencyMap> {
    check_pair(features, head)?;
    if class_index >= head.classes() {
        return Err(invalid(format!(
            "class index {class_index} out of range for {} classes",
            head.classes()
        )));
    }
    let column: Vec<f64> = (0..head.channels()).map(|k| head.weight(k, class_index)).collect();
    let values = features
        .tensor()
        .data()
        .chunks_exact(features.channels())
        .map(|pixel| pixel.iter().zip(&column).map(|(f, w)| f * w).sum())
        .collect();
    Ok(SaliencyMap {
        map: Tensor::matrix(features.height(), features.width(), values)?,
        class_index,
    })
}

/// Min-max scaling to `[0, 1]`. A constant map becomes all zeros.
pub fn normalize_map(saliency: &SaliencyMap) -> Tensor {
    let data = saliency.map.data();
    let lo = data.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    let scaled = if range > 0.0 {
        data.iter().map(|v| (v - lo) / range).collect()
    } else {
        vec![0.0; data.len()]
    };
    Tensor::new(saliency.map.shape().to_vec(), scaled).expect("scaling preserves shape and finiteness")
}

/// Nearest-neighbour enlargement of a 2-D map by an integer factor.
pub fn upsample_nearest(map: &Tensor, factor: usize) -> Result<Tensor> {
    map.expect_rank(2, "map")?;
    if factor == 0 {
        return Err(invalid("upsampling factor must be positive"));
    }
    let (h, w) = (map.rows(), map.cols());
    let (oh, ow) = (h * factor, w * factor);
    Tensor::from_fn(vec![oh, ow], |idx| {
        let (i, j) = (idx / ow, idx % ow);
        map.data()[(i / factor) * w + j / factor]
    })
}

/// Thresholds a normalised heatmap (`value >= threshold`), labels 4-connected
/// components and returns one tight box per component.
///
/// Boxes are ordered by descending pixel count, then by `(row_min, col_min)`.
pub fn extract_boxes(heatmap: &Tensor, threshold: f64) -> Result<Vec<LesionBox>> {
    heatmap.expect_rank(2, "heatmap")?;
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(invalid(format!("threshold {threshold} outside (0, 1)")));
    }
    let (h, w) = (heatmap.rows(), heatmap.cols());
    let on: Vec<bool> = heatmap.data().iter().map(|&v| v >= threshold).collect();
    let mut seen = vec![false; h * w];
    let mut boxes = Vec::new();
    let mut stack = Vec::new();
    for start in 0..h * w {
        if !on[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut b = BoundingBox {
            row_min: start / w,
            col_min: start % w,
            row_max: start / w,
            col_max: start % w,
        };
        let mut count = 0;
        while let Some(p) = stack.pop() {
            count += 1;
            let (r, c) = (p / w, p % w);
            b.row_min = b.row_min.min(r);
            b.row_max = b.row_max.max(r);
            b.col_min = b.col_min.min(c);
            b.col_max = b.col_max.max(c);
            let mut visit = |q: usize| {
                if on[q] && !seen[q] {
                    seen[q] = true;
                    stack.push(q);
                }
            };
            if r > 0 {
                visit(p - w);
            }
            if r + 1 < h {
                visit(p + w);
            }
            if c > 0 {
                visit(p - 1);
            }
            if c + 1 < w {
                visit(p + 1);
            }
        }
        boxes.push(LesionBox {
            bounds: b,
            pixel_count: count,
        });
    }
    boxes.sort_by(|a, b| {
        b.pixel_count
            .cmp(&a.pixel_count)
            .then(a.bounds.row_min.cmp(&b.bounds.row_min))
            .then(a.bounds.col_min.cmp(&b.bounds.col_min))
    });
    Ok(boxes)
}
