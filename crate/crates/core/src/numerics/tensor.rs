use serde::Serialize;

use crate::error::{invalid, shape_err, Result, XaiError};

/// Dense row-major `f64` array (last index fastest).
///
/// Every constructor checks that the extents are positive, that the data
/// length equals the product of the extents and that all entries are finite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        check_shape(&shape)?;
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(shape_err(format!(
                "shape {:?} needs {} elements, got {}",
                shape,
                expected,
                data.len()
            )));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(XaiError::NonFinite { index });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: Vec<usize>, value: f64) -> Result<Self> {
        check_shape(&shape)?;
        if !value.is_finite() {
            return Err(XaiError::NonFinite { index: 0 });
        }
        let n = shape.iter().product();
        Ok(Self {
            shape,
            data: vec![value; n],
        })
    }

    /// Rank-2 convenience constructor.
    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map(Vec::len).ok_or(XaiError::EmptyInput)?;
        if rows.iter().any(|r| r.len() != cols) {
            return Err(shape_err("ragged rows"));
        }
        Self::matrix(rows.len(), cols, rows.concat())
    }

    /// Builds a tensor by evaluating `f` on every flat index, in order.
    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(usize) -> f64) -> Result<Self> {
        check_shape(&shape)?;
        let n: usize = shape.iter().product();
        Self::new(shape, (0..n).map(&mut f).collect())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn into_parts(self) -> (Vec<usize>, Vec<f64>) {
        (self.shape, self.data)
    }

    /// Mutable access to the flat data. Callers must keep entries finite.
    #[cfg(test)]
    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, self.data)
    }

    pub fn flat_index(&self, index: &[usize]) -> Result<usize> {
        if index.len() != self.shape.len() {
            return Err(shape_err(format!(
                "index of rank {} into tensor of rank {}",
                index.len(),
                self.shape.len()
            )));
        }
        let mut flat = 0;
        for (&i, &n) in index.iter().zip(&self.shape) {
            if i >= n {
                return Err(invalid(format!("index {:?} out of bounds for {:?}", index, self.shape)));
            }
            flat = flat * n + i;
        }
        Ok(flat)
    }

    pub fn get(&self, index: &[usize]) -> Result<f64> {
        Ok(self.data[self.flat_index(index)?])
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Number of columns of a rank-2 tensor.
    pub fn cols(&self) -> usize {
        self.shape.get(1).copied().unwrap_or(1)
    }

    /// Row `i` of the tensor viewed as `shape[0] x rest`.
    pub fn row(&self, i: usize) -> &[f64] {
        let width = self.data.len() / self.shape[0];
        &self.data[i * width..(i + 1) * width]
    }

    pub fn expect_rank(&self, rank: usize, what: &str) -> Result<()> {
        if self.rank() != rank {
            return Err(shape_err(format!(
                "{what} must have rank {rank}, got shape {:?}",
                self.shape
            )));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.shape.clone(), self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> Option<f64> {
        if self.shape != other.shape {
            return None;
        }
        Some(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        )
    }
}

fn check_shape(shape: &[usize]) -> Result<()> {
    if shape.is_empty() {
        return Err(shape_err("rank-0 tensors are not supported"));
    }
    if shape.contains(&0) {
        return Err(shape_err(format!("zero-sized extent in shape {:?}", shape)));
    }
    Ok(())
}
