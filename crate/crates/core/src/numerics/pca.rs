use serde::Serialize;

use crate::error::{invalid, shape_err, Result};
use crate::numerics::linalg::dot;
use crate::numerics::Tensor;

const MAX_SWEEPS: usize = 80;

/// Fitted principal-component basis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `k x D`, rows are orthonormal principal directions.
    pub components: Tensor,
    /// Per-component variance (`sigma^2 / (N - 1)`), non-increasing.
    pub explained_variance: Vec<f64>,
    /// Total variance of the centred data across all `D` directions.
    pub total_variance: f64,
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.rows()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        self.explained_variance
            .iter()
            .map(|v| if self.total_variance > 0.0 { v / self.total_variance } else { 0.0 })
            .collect()
    }

    /// `(x - mean) . components^T` for every row of `x`.
    pub fn project(&self, x: &Tensor) -> Result<Tensor> {
        x.expect_rank(2, "data matrix")?;
        if x.cols() != self.dim() {
            return Err(shape_err(format!(
                "model dimension {} but data has {} columns",
                self.dim(),
                x.cols()
            )));
        }
        let k = self.n_components();
        let mut out = Vec::with_capacity(x.rows() * k);
        let mut centred = vec![0.0; self.dim()];
        for i in 0..x.rows() {
            for ((c, v), mu) in centred.iter_mut().zip(x.row(i)).zip(&self.mean) {
                *c = v - mu;
            }
            out.extend((0..k).map(|j| dot(&centred, self.components.row(j))));
        }
        Tensor::matrix(x.rows(), k, out)
    }

    /// `mean + y . components`.
    pub fn reconstruct(&self, y: &Tensor) -> Result<Tensor> {
        y.expect_rank(2, "projection")?;
        let k = self.n_components();
        if y.cols() != k {
            return Err(shape_err(format!("projection has {} columns, model {k}", y.cols())));
        }
        let d = self.dim();
        let mut out = Vec::with_capacity(y.rows() * d);
        for i in 0..y.rows() {
            let coords = y.row(i);
            out.extend((0..d).map(|t| {
                self.mean[t] + (0..k).map(|j| coords[j] * self.components.row(j)[t]).sum::<f64>()
            }));
        }
        Tensor::matrix(y.rows(), d, out)
    }
}

/// Centres `x` (N x D), takes its SVD by one-sided Jacobi rotations and keeps
/// the top-`k` right singular directions.
///
/// Each component is sign-normalised so that its largest-magnitude entry
/// (first one on ties) is nonnegative. Directions with zero singular value are
/// completed to an orthonormal set deterministically.
pub fn pca_fit_project(x: &Tensor, k: usize) -> Result<(PcaModel, Tensor)> {
    x.expect_rank(2, "data matrix")?;
    let (n, d) = (x.rows(), x.cols());
    if n < 2 {
        return Err(invalid("PCA needs at least two rows"));
    }
    if k == 0 || k > n.min(d) {
        return Err(invalid(format!(
            "cannot keep {k} components from a {n}x{d} matrix"
        )));
    }

    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(x.row(i)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    // column-major centred data
    let mut cols: Vec<Vec<f64>> = (0..d)
        .map(|t| (0..n).map(|i| x.row(i)[t] - mean[t]).collect())
        .collect();
    let total_ss: f64 = cols.iter().flat_map(|c| c.iter()).map(|v| v * v).sum();

    let (sigmas, directions) = if d <= n {
        // rotate the D columns of Xc; V accumulates the right singular vectors
        let mut v: Vec<Vec<f64>> = (0..d)
            .map(|t| (0..d).map(|s| if s == t { 1.0 } else { 0.0 }).collect())
            .collect();
        jacobi_sweeps(&mut cols, Some(&mut v));
        let sigmas: Vec<f64> = cols.iter().map(|c| norm(c)).collect();
        (sigmas, v)
    } else {
        // rotate the N columns of Xc^T; normalised columns are right singular vectors of Xc
        let mut rows: Vec<Vec<f64>> = (0..n).map(|i| (0..d).map(|t| cols[t][i]).collect()).collect();
        jacobi_sweeps(&mut rows, None);
        let sigmas: Vec<f64> = rows.iter().map(|c| norm(c)).collect();
        let dirs = rows
            .into_iter()
            .zip(&sigmas)
            .map(|(c, &s)| if s > 0.0 { c.iter().map(|v| v / s).collect() } else { vec![0.0; d] })
            .collect();
        (sigmas, dirs)
    };

    let mut order: Vec<usize> = (0..sigmas.len()).collect();
    order.sort_by(|&a, &b| sigmas[b].total_cmp(&sigmas[a]).then(a.cmp(&b)));
    let sigma_max = sigmas[order[0]];
    let cutoff = 1e-12 * sigma_max;

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut explained = Vec::with_capacity(k);
    for &idx in order.iter().take(k) {
        let sigma = sigmas[idx];
        let candidate = if sigma > cutoff && sigma > 0.0 {
            orthonormalise(directions[idx].clone(), &basis)
        } else {
            None
        };
        let dir = match candidate {
            Some(v) => v,
            None => complete_basis(&basis, d),
        };
        basis.push(dir);
        explained.push(if sigma > cutoff { sigma * sigma / (n - 1) as f64 } else { 0.0 });
    }
    for dir in &mut basis {
        fix_sign(dir);
    }

    let components = Tensor::matrix(k, d, basis.concat())?;
    let model = PcaModel {
        mean,
        components,
        explained_variance: explained,
        total_variance: total_ss / (n - 1) as f64,
    };
    let y = model.project(x)?;
    Ok((model, y))
}

fn jacobi_sweeps(cols: &mut [Vec<f64>], mut v: Option<&mut Vec<Vec<f64>>>) {
    let m = cols.len();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..m {
            for q in p + 1..m {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(cols, p, q, c, s);
                if let Some(v) = v.as_deref_mut() {
                    rotate(v, p, q, c, s);
                }
            }
        }
        if !rotated {
            break;
        }
    }
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(q);
    for (a, b) in left[p].iter_mut().zip(right[0].iter_mut()) {
        let (x, y) = (*a, *b);
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Modified Gram-Schmidt against `basis`; `None` if nothing is left.
fn orthonormalise(mut v: Vec<f64>, basis: &[Vec<f64>]) -> Option<Vec<f64>> {
    let start = norm(&v);
    for _ in 0..2 {
        for b in basis {
            let proj = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
        }
    }
    let len = norm(&v);
    if len <= 1e-8 * start.max(f64::MIN_POSITIVE) || len == 0.0 {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= len);
    Some(v)
}

/// Unit vector orthogonal to `basis`: the coordinate axis with the largest
/// residual after projection.
fn complete_basis(basis: &[Vec<f64>], d: usize) -> Vec<f64> {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for axis in 0..d {
        let mut e = vec![0.0; d];
        e[axis] = 1.0;
        for b in basis {
            let proj = b[axis];
            e.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
        }
        let len = norm(&e);
        if best.as_ref().is_none_or(|(l, _)| len > *l + 1e-12) {
            best = Some((len, e));
        }
    }
    let (_, e) = best.expect("d >= 1");
    orthonormalise(e, basis).expect("k <= d leaves room for another direction")
}

fn fix_sign(v: &mut [f64]) {
    let mut arg = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[arg].abs() {
            arg = i;
        }
    }
    if v[arg] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}
