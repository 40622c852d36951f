//! Gaussian-process regression with the Mahalanobis kernel
//! `k(x, x') = gamma^2 exp(-(x - x')^T B^T B (x - x'))`.
//!
//! The kernel only sees inputs through `z = Bx`, so every posterior quantity
//! is computed on projected coordinates. An RBF-ARD model is the special
//! case `d = D` with diagonal `B`.

mod fit;
mod lml;

pub use fit::{
    fit_ard_hyperparameters, fit_hyperparameters, fit_hyperparameters_with, AdamConfig,
    EmbeddingStructure, FitReport,
};
pub use lml::{ard_log_marginal_likelihood, log_marginal_likelihood, LmlGradient};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::domain::Dataset;
use crate::error::{dim_mismatch, Error, Result};
use crate::linalg::{cholesky_with_jitter, forward_solve, has_full_row_rank};

/// Lower bound on the observation noise variance.
pub const MIN_NOISE_VAR: f64 = 1e-8;
/// Relative singular-value tolerance for the full-row-rank check on `B`.
pub const RANK_TOL: f64 = 1e-10;
/// Posterior variances below `-VAR_NEG_TOL` are reported as numerical failures.
pub const VAR_NEG_TOL: f64 = 1e-10;

/// Signal scale, embedding matrix and noise variance of the Mahalanobis kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct MahaKernelParams {
    gamma: f64,
    b: DMatrix<f64>,
    noise_var: f64,
}

impl MahaKernelParams {
    pub fn new(gamma: f64, b: DMatrix<f64>, noise_var: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
        }
        if !(noise_var > 0.0 && noise_var.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise variance must be positive, got {noise_var}"
            )));
        }
        if b.nrows() == 0 || b.nrows() > b.ncols() {
            return Err(Error::InvalidArgument(format!(
                "embedding must satisfy 1 <= d <= D, got {}x{}",
                b.nrows(),
                b.ncols()
            )));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite embedding entry".into()));
        }
        Ok(Self { gamma, b, noise_var })
    }

    /// RBF-ARD parameters: diagonal `B` with the given inverse length scales.
    pub fn ard(gamma: f64, inv_lengthscales: &[f64], noise_var: f64) -> Result<Self> {
        let b = DMatrix::from_diagonal(&DVector::from_column_slice(inv_lengthscales));
        Self::new(gamma, b, noise_var)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn embedding(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// Embedding dimension `d`.
    pub fn embed_dim(&self) -> usize {
        self.b.nrows()
    }

    /// Input dimension `D`.
    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn has_full_rank(&self) -> bool {
        has_full_row_rank(&self.b, RANK_TOL)
    }

    /// Same signal and noise, identity embedding on `d` coordinates: the
    /// plain RBF kernel on the projected space.
    pub fn low_dim_rbf(&self) -> Self {
        let d = self.embed_dim();
        Self { gamma: self.gamma, b: DMatrix::identity(d, d), noise_var: self.noise_var }
    }

    pub fn project(&self, x: &[f64]) -> Result<DVector<f64>> {
        if x.len() != self.input_dim() {
            return Err(dim_mismatch("kernel input", self.input_dim(), x.len()));
        }
        Ok(&self.b * DVector::from_column_slice(x))
    }

    /// Kernel on already projected coordinates.
    pub fn kernel_z(&self, z: &[f64], z2: &[f64]) -> f64 {
        let r2: f64 = z.iter().zip(z2).map(|(a, b)| (a - b) * (a - b)).sum();
        self.gamma * self.gamma * (-r2).exp()
    }
}

/// Evaluates the Mahalanobis kernel at `(x, x2)`.
pub fn kernel_eval(params: &MahaKernelParams, x: &[f64], x2: &[f64]) -> Result<f64> {
    if x2.len() != x.len() {
        return Err(dim_mismatch("second kernel input", x.len(), x2.len()));
    }
    if x.len() != params.input_dim() {
        return Err(dim_mismatch("kernel input", params.input_dim(), x.len()));
    }
    let diff: Vec<f64> = x.iter().zip(x2).map(|(a, b)| a - b).collect();
    let bd = params.embedding() * DVector::from_vec(diff);
    Ok(params.gamma * params.gamma * (-bd.norm_squared()).exp())
}

/// Kernel Gram matrix of `points` (noise not included).
pub fn gram_matrix(params: &MahaKernelParams, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let z = project_rows(params, points)?;
    Ok(gram_from_projected(params, &z))
}

pub(crate) fn project_rows(params: &MahaKernelParams, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let dim = params.input_dim();
    let mut x = DMatrix::zeros(points.len(), dim);
    for (i, p) in points.iter().enumerate() {
        if p.len() != dim {
            return Err(dim_mismatch("training input", dim, p.len()));
        }
        x.row_mut(i).copy_from_slice(p);
    }
    Ok(&x * params.embedding().transpose())
}

pub(crate) fn gram_from_projected(params: &MahaKernelParams, z: &DMatrix<f64>) -> DMatrix<f64> {
    let n = z.nrows();
    let g2 = params.gamma * params.gamma;
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = g2;
        for j in 0..i {
            let r2 = (z.row(i) - z.row(j)).norm_squared();
            let v = g2 * (-r2).exp();
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Posterior mean/variance and their gradients with respect to `z = Bx`.
#[derive(Clone, Debug)]
pub struct ZMoments {
    pub mean: f64,
    pub var: f64,
    pub dmean: DVector<f64>,
    pub dvar: DVector<f64>,
}

/// Fitted GP posterior. Immutable; safe to share across threads.
#[derive(Clone, Debug)]
pub struct GpPosterior {
    params: MahaKernelParams,
    train_inputs: Vec<Vec<f64>>,
    train_values: DVector<f64>,
    projected: DMatrix<f64>,
    chol: Option<Cholesky<f64, Dyn>>,
    alpha: DVector<f64>,
    jitter: f64,
}

/// Factorizes `K + sigma^2 I` for the dataset and solves for the weight vector.
pub fn fit_posterior(data: &Dataset, params: &MahaKernelParams) -> Result<GpPosterior> {
    GpPosterior::fit(data.points().to_vec(), data.values().to_vec(), params)
}

impl GpPosterior {
    fn fit(inputs: Vec<Vec<f64>>, values: Vec<f64>, params: &MahaKernelParams) -> Result<Self> {
        if inputs.len() != values.len() {
            return Err(dim_mismatch("training values", inputs.len(), values.len()));
        }
        let projected = project_rows(params, &inputs)?;
        let y = DVector::from_vec(values);
        if inputs.is_empty() {
            return Ok(Self {
                params: params.clone(),
                train_inputs: inputs,
                train_values: y,
                projected,
                chol: None,
                alpha: DVector::zeros(0),
                jitter: 0.0,
            });
        }
        let mut c = gram_from_projected(params, &projected);
        for i in 0..c.nrows() {
            c[(i, i)] += params.noise_var;
        }
        let (chol, jitter) = cholesky_with_jitter(c)?;
        let alpha = chol.solve(&y);
        Ok(Self {
            params: params.clone(),
            train_inputs: inputs,
            train_values: y,
            projected,
            chol: Some(chol),
            alpha,
            jitter,
        })
    }

    pub fn params(&self) -> &MahaKernelParams {
        &self.params
    }

    pub fn input_dim(&self) -> usize {
        self.params.input_dim()
    }

    pub fn embed_dim(&self) -> usize {
        self.params.embed_dim()
    }

    pub fn num_train(&self) -> usize {
        self.train_inputs.len()
    }

    pub fn train_inputs(&self) -> &[Vec<f64>] {
        &self.train_inputs
    }

    pub fn train_values(&self) -> &[f64] {
        self.train_values.as_slice()
    }

    /// Projected training inputs, one row per observation.
    pub fn projected_inputs(&self) -> &DMatrix<f64> {
        &self.projected
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    /// Lower-triangular factor of `K + sigma^2 I` (`None` for an empty dataset).
    pub fn cholesky_factor(&self) -> Option<DMatrix<f64>> {
        self.chol.as_ref().map(|c| c.l())
    }

    /// Jitter added to the diagonal during factorization.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn best_observed(&self) -> Option<f64> {
        self.train_values.iter().cloned().reduce(f64::min)
    }

    fn kvec(&self, z: &[f64]) -> DVector<f64> {
        let n = self.projected.nrows();
        DVector::from_fn(n, |i, _| {
            let r2: f64 = self
                .projected
                .row(i)
                .iter()
                .zip(z)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            self.params.gamma * self.params.gamma * (-r2).exp()
        })
    }

    fn check_z(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.embed_dim() {
            return Err(dim_mismatch("projected input", self.embed_dim(), z.len()));
        }
        Ok(())
    }

    fn clamp_var(&self, var: f64) -> Result<f64> {
        if var >= 0.0 {
            Ok(var)
        } else if var >= -VAR_NEG_TOL * self.params.gamma.powi(2).max(1.0) {
            Ok(0.0)
        } else {
            Err(Error::NumericalFailure(format!("negative posterior variance {var:.3e}")))
        }
    }

    /// Posterior mean and variance at projected coordinates `z = Bx`.
    pub fn mean_var_z(&self, z: &[f64]) -> Result<(f64, f64)> {
        self.check_z(z)?;
        let g2 = self.params.gamma * self.params.gamma;
        let Some(chol) = &self.chol else {
            return Ok((0.0, g2));
        };
        let k = self.kvec(z);
        let mean = k.dot(&self.alpha);
        let v = forward_solve(chol, &k);
        Ok((mean, self.clamp_var(g2 - v.norm_squared())?))
    }

    /// Posterior mean and variance at `x`.
    pub fn mean_var(&self, x: &[f64]) -> Result<(f64, f64)> {
        let z = self.params.project(x)?;
        self.mean_var_z(z.as_slice())
    }

    /// Posterior covariance at projected coordinates.
    pub fn covariance_z(&self, z: &[f64], z2: &[f64]) -> Result<f64> {
        self.check_z(z)?;
        self.check_z(z2)?;
        let prior = self.params.kernel_z(z, z2);
        let Some(chol) = &self.chol else {
            return Ok(prior);
        };
        let v1 = forward_solve(chol, &self.kvec(z));
        let v2 = forward_solve(chol, &self.kvec(z2));
        Ok(prior - v1.dot(&v2))
    }

    /// Posterior covariance `kappa_t(x, x2)`.
    pub fn covariance(&self, x: &[f64], x2: &[f64]) -> Result<f64> {
        let z = self.params.project(x)?;
        let z2 = self.params.project(x2)?;
        self.covariance_z(z.as_slice(), z2.as_slice())
    }

    /// Posterior covariance matrix of a set of points, computed from one
    /// batch of triangular solves.
    pub fn covariance_matrix_z(&self, zs: &[DVector<f64>]) -> Result<DMatrix<f64>> {
        let k = zs.len();
        let mut m = DMatrix::zeros(k, k);
        for z in zs {
            self.check_z(z.as_slice())?;
        }
        let vs: Vec<DVector<f64>> = match &self.chol {
            Some(chol) => zs.iter().map(|z| forward_solve(chol, &self.kvec(z.as_slice()))).collect(),
            None => Vec::new(),
        };
        for i in 0..k {
            for j in 0..=i {
                let mut c = self.params.kernel_z(zs[i].as_slice(), zs[j].as_slice());
                if !vs.is_empty() {
                    c -= vs[i].dot(&vs[j]);
                }
                m[(i, j)] = c;
                m[(j, i)] = c;
            }
        }
        Ok(m)
    }

    /// Mean, variance and their `z`-gradients.
    pub fn moments_z(&self, z: &[f64]) -> Result<ZMoments> {
        self.check_z(z)?;
        let d = z.len();
        let g2 = self.params.gamma * self.params.gamma;
        let Some(chol) = &self.chol else {
            return Ok(ZMoments {
                mean: 0.0,
                var: g2,
                dmean: DVector::zeros(d),
                dvar: DVector::zeros(d),
            });
        };
        let k = self.kvec(z);
        let cinv_k = chol.solve(&k);
        let mean = k.dot(&self.alpha);
        let var = self.clamp_var(g2 - k.dot(&cinv_k))?;
        // dk_i/dz = -2 k_i (z - z_i)
        let mut dmean = DVector::zeros(d);
        let mut dvar = DVector::zeros(d);
        for i in 0..k.len() {
            let wm = -2.0 * k[i] * self.alpha[i];
            let wv = 4.0 * k[i] * cinv_k[i];
            for c in 0..d {
                let diff = z[c] - self.projected[(i, c)];
                dmean[c] += wm * diff;
                dvar[c] += wv * diff;
            }
        }
        Ok(ZMoments { mean, var, dmean, dvar })
    }

    /// Posterior with `x_pending` added as a training input.
    ///
    /// The covariance of the result does not depend on the value attached to
    /// the new input; the current posterior mean is used so the mean function
    /// is unchanged as well.
    pub fn condition_on(&self, x_pending: &[f64]) -> Result<GpPosterior> {
        let (mean, _) = self.mean_var(x_pending)?;
        let mut inputs = self.train_inputs.clone();
        inputs.push(x_pending.to_vec());
        let mut values = self.train_values.as_slice().to_vec();
        values.push(mean);
        GpPosterior::fit(inputs, values, &self.params)
    }
}
