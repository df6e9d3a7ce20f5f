use serde::Serialize;

use crate::error::{invalid, shape_err, Result};

/// Partition of an `H x W` image into `count` 4-connected regions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SuperpixelMap {
    height: usize,
    width: usize,
    labels: Vec<usize>,
    count: usize,
}

impl SuperpixelMap {
    /// Validates that labels are dense in `[0, count)`, none is empty and
    /// every region is 4-connected.
    pub fn from_labels(height: usize, width: usize, labels: Vec<usize>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(shape_err("superpixel map needs positive extents"));
        }
        if labels.len() != height * width {
            return Err(shape_err(format!(
                "{} labels for a {height}x{width} map",
                labels.len()
            )));
        }
        let count = labels.iter().max().map_or(0, |m| m + 1);
        let mut sizes = vec![0usize; count];
        for &l in &labels {
            sizes[l] += 1;
        }
        if let Some(empty) = sizes.iter().position(|&s| s == 0) {
            return Err(invalid(format!("superpixel {empty} is empty")));
        }
        let map = Self {
            height,
            width,
            labels,
            count,
        };
        map.check_connected(&sizes)?;
        Ok(map)
    }

    fn check_connected(&self, sizes: &[usize]) -> Result<()> {
        let (h, w) = (self.height, self.width);
        let mut seen = vec![false; h * w];
        let mut visited_label = vec![false; self.count];
        let mut stack = Vec::new();
        for start in 0..h * w {
            if seen[start] {
                continue;
            }
            let label = self.labels[start];
            if visited_label[label] {
                return Err(invalid(format!("superpixel {label} is not 4-connected")));
            }
            visited_label[label] = true;
            seen[start] = true;
            stack.push(start);
            let mut size = 0;
            while let Some(p) = stack.pop() {
                size += 1;
                let (r, c) = (p / w, p % w);
                let neighbours = [
                    (r > 0).then(|| p - w),
                    (r + 1 < h).then(|| p + w),
                    (c > 0).then(|| p - 1),
                    (c + 1 < w).then(|| p + 1),
                ];
                for q in neighbours.into_iter().flatten() {
                    if !seen[q] && self.labels[q] == label {
                        seen[q] = true;
                        stack.push(q);
                    }
                }
            }
            if size != sizes[label] {
                return Err(invalid(format!("superpixel {label} is not 4-connected")));
            }
        }
        Ok(())
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, row: usize, col: usize) -> usize {
        self.labels[row * self.width + col]
    }

    /// Applies `new_label = permutation[old_label]`.
    /// Labels sorted by the raster position of their first pixel.
    pub fn raster_order(&self) -> Vec<usize> {
        let mut seen = vec![false; self.count];
        let mut order = Vec::with_capacity(self.count);
        for &l in &self.labels {
            if !seen[l] {
                seen[l] = true;
                order.push(l);
            }
        }
        order
    }

    pub fn relabel(&self, permutation: &[usize]) -> Result<Self> {
        let mut check = permutation.to_vec();
        check.sort_unstable();
        if check != (0..self.count).collect::<Vec<_>>() {
            return Err(invalid("relabelling must be a permutation of the labels"));
        }
        Ok(Self {
            labels: self.labels.iter().map(|&l| permutation[l]).collect(),
            ..self.clone()
        })
    }
}

/// Deterministic grid of exactly `target` tiles.
///
/// The image is cut into `rows = max(ceil(sqrt(target)), ceil(target / W))`
/// horizontal bands (capped at `H`); the `target` tiles are spread over the
/// bands as evenly as possible, earlier bands taking the extra tile, and each
/// band is cut into equal-width columns.
pub fn grid_superpixels(height: usize, width: usize, target: usize) -> Result<SuperpixelMap> {
    if height == 0 || width == 0 {
        return Err(shape_err("image extents must be positive"));
    }
    if target == 0 || target > height * width {
        return Err(invalid(format!(
            "cannot cut a {height}x{width} image into {target} superpixels"
        )));
    }
    let sqrt_ceil = (1..=target).find(|s| s * s >= target).unwrap_or(target);
    let rows = sqrt_ceil.max(target.div_ceil(width)).min(height);
    let base = target / rows;
    let extra = target % rows;
    let mut labels = vec![0usize; height * width];
    let mut next = 0;
    for band in 0..rows {
        let tiles = base + usize::from(band < extra);
        let (r0, r1) = (band * height / rows, (band + 1) * height / rows);
        for r in r0..r1 {
            for c in 0..width {
                labels[r * width + c] = next + c * tiles / width;
            }
        }
        next += tiles;
    }
    SuperpixelMap::from_labels(height, width, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_tiles_on_4x4() {
        let m = grid_superpixels(4, 4, 4).unwrap();
        assert_eq!(m.count(), 4);
        #[rustfmt::skip]
        let expected = vec![
            0, 0, 1, 1,
            0, 0, 1, 1,
            2, 2, 3, 3,
            2, 2, 3, 3,
        ];
        assert_eq!(m.labels(), expected.as_slice());
    }

    #[test]
    fn single_pixel() {
        let m = grid_superpixels(1, 1, 1).unwrap();
        assert_eq!(m.count(), 1);
        assert!(grid_superpixels(1, 1, 2).is_err());
        assert!(grid_superpixels(0, 3, 1).is_err());
    }

    #[test]
    fn exact_count_and_partition() {
        for h in 1..12 {
            for w in 1..12 {
                for t in 1..=h * w {
                    let m = grid_superpixels(h, w, t).unwrap();
                    assert_eq!(m.count(), t, "{h}x{w} target {t}");
                }
            }
        }
    }

    #[test]
    fn rejects_disconnected_labels() {
        assert!(SuperpixelMap::from_labels(1, 3, vec![0, 1, 0]).is_err());
        assert!(SuperpixelMap::from_labels(1, 3, vec![0, 2, 2]).is_err());
        assert!(SuperpixelMap::from_labels(1, 3, vec![0, 1, 1]).is_ok());
    }
}
