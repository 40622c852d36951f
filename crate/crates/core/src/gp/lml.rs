use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::{gram_from_projected, project_rows, MahaKernelParams};
use crate::domain::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{chol_logdet, cholesky_with_jitter};

/// Gradient of the log marginal likelihood in the optimization
/// parameterization: `log gamma`, `log sigma^2` and the raw entries of `B`.
#[derive(Clone, Debug, PartialEq)]
pub struct LmlGradient {
    pub log_gamma: f64,
    pub log_noise_var: f64,
    pub b: DMatrix<f64>,
}

struct Factorized {
    value: f64,
    /// `alpha alpha^T - C^{-1}`
    w: DMatrix<f64>,
    /// kernel part of `C` (no noise)
    kf: DMatrix<f64>,
}

fn factorize(kf: DMatrix<f64>, noise_var: f64, y: &DVector<f64>) -> Result<Factorized> {
    let n = kf.nrows();
    let mut c = kf.clone();
    for i in 0..n {
        c[(i, i)] += noise_var;
    }
    let (chol, _) = cholesky_with_jitter(c)?;
    let alpha = chol.solve(y);
    let value = -0.5 * y.dot(&alpha) - 0.5 * chol_logdet(&chol) - 0.5 * n as f64 * (2.0 * PI).ln();
    if !value.is_finite() {
        return Err(Error::NumericalFailure("non-finite log marginal likelihood".into()));
    }
    let w = &alpha * alpha.transpose() - chol.inverse();
    Ok(Factorized { value, w, kf })
}

fn input_matrix(data: &Dataset) -> DMatrix<f64> {
    let n = data.len();
    let dim = data.dim().unwrap_or(0);
    let mut x = DMatrix::zeros(n, dim);
    for (i, p) in data.points().iter().enumerate() {
        x.row_mut(i).copy_from_slice(p);
    }
    x
}

/// Log marginal likelihood of `data` under the Mahalanobis-kernel GP and its
/// analytic gradient, from `dL/dtheta = 1/2 tr((a a^T - C^{-1}) dC/dtheta)`.
pub fn log_marginal_likelihood(
    data: &Dataset,
    params: &MahaKernelParams,
) -> Result<(f64, LmlGradient)> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("log marginal likelihood needs N >= 1".into()));
    }
    let z = project_rows(params, data.points())?;
    let y = DVector::from_column_slice(data.values());
    let f = factorize(gram_from_projected(params, &z), params.noise_var(), &y)?;

    let m = f.w.component_mul(&f.kf);
    let log_gamma = m.sum();
    let log_noise_var = 0.5 * params.noise_var() * f.w.trace();
    // sum_ij M_ij (x_i - x_j)(x_i - x_j)^T = 2 X^T (diag(M 1) - M) X
    let mut lap = -m.clone();
    for i in 0..lap.nrows() {
        lap[(i, i)] += m.row(i).sum();
    }
    let x = input_matrix(data);
    let b = -2.0 * z.transpose() * lap * x;
    Ok((f.value, LmlGradient { log_gamma, log_noise_var, b }))
}

/// Log marginal likelihood for an RBF-ARD kernel
/// `gamma^2 exp(-sum_k b_k^2 (x_k - x'_k)^2)` with gradient in
/// `(log gamma, log sigma^2, b)`. Written against per-coordinate distances,
/// independently of the Mahalanobis path.
pub fn ard_log_marginal_likelihood(
    data: &Dataset,
    gamma: f64,
    inv_lengthscales: &[f64],
    noise_var: f64,
) -> Result<(f64, f64, f64, Vec<f64>)> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("log marginal likelihood needs N >= 1".into()));
    }
    let pts = data.points();
    let n = pts.len();
    let dim = inv_lengthscales.len();
    if pts[0].len() != dim {
        return Err(crate::error::dim_mismatch("ARD input", dim, pts[0].len()));
    }
    let g2 = gamma * gamma;
    let kf = DMatrix::from_fn(n, n, |i, j| {
        let r2: f64 = (0..dim)
            .map(|k| {
                let d = inv_lengthscales[k] * (pts[i][k] - pts[j][k]);
                d * d
            })
            .sum();
        g2 * (-r2).exp()
    });
    let y = DVector::from_column_slice(data.values());
    let f = factorize(kf, noise_var, &y)?;
    let m = f.w.component_mul(&f.kf);
    let d_log_gamma = m.sum();
    let d_log_noise = 0.5 * noise_var * f.w.trace();
    let grad_b = (0..dim)
        .map(|k| {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let d = pts[i][k] - pts[j][k];
                    s += m[(i, j)] * d * d;
                }
            }
            -inv_lengthscales[k] * s
        })
        .collect();
    Ok((f.value, d_log_gamma, d_log_noise, grad_b))
}
