use serde::Serialize;

use crate::error::{invalid, shape_err, Result, XaiError};
use crate::numerics::Tensor;

/// Relative pivot threshold below which a Cholesky factorisation is declared
/// rank deficient.
const PIVOT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WlsFit {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

impl WlsFit {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + dot(&self.coefficients, x)
    }
}

/// Minimises `sum_n w_n (y_n - x_n.beta - beta0)^2 + ridge |beta|^2`.
///
/// The intercept is not penalised: the design is centred on the weighted
/// means and the normal equations are solved by Cholesky.
pub fn weighted_least_squares(x: &Tensor, y: &[f64], w: &[f64], ridge: f64) -> Result<WlsFit> {
    let (n, m) = check_inputs(x, y, w, ridge)?;
    let total: f64 = w.iter().sum();
    let mut x_mean = vec![0.0; m];
    let mut y_mean = 0.0;
    for i in 0..n {
        for (acc, v) in x_mean.iter_mut().zip(x.row(i)) {
            *acc += w[i] * v;
        }
        y_mean += w[i] * y[i];
    }
    x_mean.iter_mut().for_each(|v| *v /= total);
    y_mean /= total;

    let mut gram = vec![0.0; m * m];
    let mut rhs = vec![0.0; m];
    let mut centred = vec![0.0; m];
    for i in 0..n {
        if w[i] == 0.0 {
            continue;
        }
        for (c, (v, mu)) in centred.iter_mut().zip(x.row(i).iter().zip(&x_mean)) {
            *c = v - mu;
        }
        accumulate(&mut gram, &mut rhs, &centred, w[i], y[i] - y_mean);
    }
    let coefficients = solve_normal(gram, rhs, m, ridge)?;
    let intercept = y_mean - dot(&x_mean, &coefficients);
    Ok(WlsFit {
        coefficients,
        intercept,
    })
}

/// Same objective with `beta0 = 0`.
pub fn weighted_least_squares_through_origin(
    x: &Tensor,
    y: &[f64],
    w: &[f64],
    ridge: f64,
) -> Result<Vec<f64>> {
    let (n, m) = check_inputs(x, y, w, ridge)?;
    let mut gram = vec![0.0; m * m];
    let mut rhs = vec![0.0; m];
    for i in 0..n {
        if w[i] != 0.0 {
            accumulate(&mut gram, &mut rhs, x.row(i), w[i], y[i]);
        }
    }
    solve_normal(gram, rhs, m, ridge)
}

/// Solves `A x = b` for symmetric positive-definite `A` (row-major `m x m`).
pub fn cholesky_solve(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let m = b.len();
    if a.len() != m * m {
        return Err(shape_err(format!("matrix of {} entries for {m} unknowns", a.len())));
    }
    let scale = (0..m).map(|i| a[i * m + i].abs()).fold(0.0, f64::max);
    let tol = PIVOT_TOLERANCE * scale.max(f64::MIN_POSITIVE);
    let mut l = vec![0.0; m * m];
    for j in 0..m {
        let mut d = a[j * m + j];
        for k in 0..j {
            d -= l[j * m + k] * l[j * m + k];
        }
        if !(d > tol) {
            return Err(XaiError::RankDeficient);
        }
        let d = d.sqrt();
        l[j * m + j] = d;
        for i in j + 1..m {
            let mut s = a[i * m + j];
            for k in 0..j {
                s -= l[i * m + k] * l[j * m + k];
            }
            l[i * m + j] = s / d;
        }
    }
    let mut z = b.to_vec();
    for i in 0..m {
        for k in 0..i {
            z[i] -= l[i * m + k] * z[k];
        }
        z[i] /= l[i * m + i];
    }
    for i in (0..m).rev() {
        for k in i + 1..m {
            z[i] -= l[k * m + i] * z[k];
        }
        z[i] /= l[i * m + i];
    }
    Ok(z)
}

fn check_inputs(x: &Tensor, y: &[f64], w: &[f64], ridge: f64) -> Result<(usize, usize)> {
    x.expect_rank(2, "design matrix")?;
    let (n, m) = (x.rows(), x.cols());
    if y.len() != n || w.len() != n {
        return Err(shape_err(format!(
            "design has {n} rows but {} targets and {} weights",
            y.len(),
            w.len()
        )));
    }
    if w.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(invalid("weights must be finite and nonnegative"));
    }
    if !w.iter().any(|&v| v > 0.0) {
        return Err(invalid("at least one weight must be positive"));
    }
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(invalid("ridge must be finite and nonnegative"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(invalid("targets must be finite"));
    }
    Ok((n, m))
}

fn accumulate(gram: &mut [f64], rhs: &mut [f64], x: &[f64], w: f64, y: f64) {
    let m = x.len();
    for a in 0..m {
        let wa = w * x[a];
        if wa == 0.0 {
            continue;
        }
        rhs[a] += wa * y;
        for b in a..m {
            gram[a * m + b] += wa * x[b];
        }
    }
}

fn solve_normal(mut gram: Vec<f64>, rhs: Vec<f64>, m: usize, ridge: f64) -> Result<Vec<f64>> {
    for a in 0..m {
        for b in 0..a {
            gram[a * m + b] = gram[b * m + a];
        }
        gram[a * m + a] += ridge;
    }
    cholesky_solve(&gram, &rhs)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
