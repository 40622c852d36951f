//! Marginal-likelihood hyperparameter fitting with Adam.
//!
//! Parameters are `(log gamma, log sigma^2, B)`. Each restart draws `B` with
//! i.i.d. `N(0, 1/D)` entries; the returned parameters are the best iterate
//! over all restarts.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::lml::{ard_log_marginal_likelihood, log_marginal_likelihood};
use super::{MahaKernelParams, MIN_NOISE_VAR};
use crate::domain::Dataset;
use crate::error::{Error, Result};
use crate::optim::Adam;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Likelihood evaluations per restart.
    pub iterations: usize,
    /// Fresh random restarts.
    pub restarts: usize,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            iterations: 500,
            restarts: 4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingStructure {
    Full,
    /// Diagonal `B`, `d = D` (RBF-ARD through the Mahalanobis code path).
    Diagonal,
}

#[derive(Clone, Debug)]
pub struct FitReport {
    pub params: MahaKernelParams,
    pub lml: f64,
    /// Likelihood at every evaluated iterate, restarts concatenated.
    pub trace: Vec<f64>,
    /// Likelihood at each restart's starting point (`NaN` when it failed).
    pub initial_lml: Vec<f64>,
    pub failed_restarts: usize,
    /// `B` was rank-deficient and had to be perturbed.
    pub perturbed: bool,
}

/// Packed parameter vector: `[log gamma, log sigma^2, B...]`.
#[derive(Clone, Debug)]
struct Packed {
    theta: Vec<f64>,
    d: usize,
    dim: usize,
    structure: EmbeddingStructure,
}

impl Packed {
    fn from_params(p: &MahaKernelParams, structure: EmbeddingStructure) -> Self {
        let b = p.embedding();
        let mut theta = vec![p.gamma().ln(), p.noise_var().ln()];
        match structure {
            EmbeddingStructure::Full => {
                for i in 0..b.nrows() {
                    for j in 0..b.ncols() {
                        theta.push(b[(i, j)]);
                    }
                }
            }
            EmbeddingStructure::Diagonal => theta.extend(b.diagonal().iter()),
        }
        Self { theta, d: b.nrows(), dim: b.ncols(), structure }
    }

    fn params(&self) -> Result<MahaKernelParams> {
        let b = match self.structure {
            EmbeddingStructure::Full => DMatrix::from_row_slice(self.d, self.dim, &self.theta[2..]),
            EmbeddingStructure::Diagonal => {
                DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.theta[2..]))
            }
        };
        MahaKernelParams::new(self.theta[0].exp(), b, self.theta[1].exp())
    }

    fn clamp(&mut self) {
        self.theta[1] = self.theta[1].max(MIN_NOISE_VAR.ln());
    }
}

fn initial_scales(data: &Dataset) -> (f64, f64) {
    let y = data.values();
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let var = if var > 1e-12 { var } else { 1.0 };
    (var.sqrt(), (0.1 * var).max(1e-6))
}

fn random_start<R: Rng + ?Sized>(
    data: &Dataset,
    d: usize,
    structure: EmbeddingStructure,
    rng: &mut R,
) -> Result<MahaKernelParams> {
    let dim = data.dim().unwrap_or(0);
    let scale = 1.0 / (dim as f64).sqrt();
    let b = match structure {
        EmbeddingStructure::Full => DMatrix::from_fn(d, dim, |_, _| {
            let v: f64 = StandardNormal.sample(rng);
            v * scale
        }),
        EmbeddingStructure::Diagonal => {
            let diag: Vec<f64> = (0..dim)
                .map(|_| {
                    let v: f64 = StandardNormal.sample(rng);
                    v * scale
                })
                .collect();
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag))
        }
    };
    let (gamma, noise) = initial_scales(data);
    MahaKernelParams::new(gamma, b, noise)
}

struct Run {
    best: Option<(f64, MahaKernelParams)>,
    trace: Vec<f64>,
    initial: f64,
}

fn adam_run(
    data: &Dataset,
    start: &MahaKernelParams,
    structure: EmbeddingStructure,
    cfg: &AdamConfig,
) -> Run {
    let mut packed = Packed::from_params(start, structure);
    packed.clamp();
    let mut adam = Adam::new(packed.theta.len(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);
    let mut run = Run { best: None, trace: Vec::new(), initial: f64::NAN };
    for it in 0..cfg.iterations.max(1) {
        let Ok(params) = packed.params() else { break };
        let Ok((value, grad)) = log_marginal_likelihood(data, &params) else { break };
        if it == 0 {
            run.initial = value;
        }
        run.trace.push(value);
        if run.best.as_ref().map_or(true, |(b, _)| value > *b) {
            run.best = Some((value, params));
        }
        let mut g = vec![grad.log_gamma, grad.log_noise_var];
        match structure {
            EmbeddingStructure::Full => {
                for i in 0..grad.b.nrows() {
                    for j in 0..grad.b.ncols() {
                        g.push(grad.b[(i, j)]);
                    }
                }
            }
            EmbeddingStructure::Diagonal => g.extend(grad.b.diagonal().iter()),
        }
        adam.ascend(&mut packed.theta, &g);
        packed.clamp();
    }
    run
}

/// Fits `(gamma, B, sigma^2)` with a full `d x D` embedding.
pub fn fit_hyperparameters<R: Rng + ?Sized>(
    data: &Dataset,
    d: usize,
    cfg: &AdamConfig,
    rng: &mut R,
) -> Result<MahaKernelParams> {
    fit_hyperparameters_with(data, d, EmbeddingStructure::Full, cfg, None, rng).map(|r| r.params)
}

/// Full fitting entry point. With `warm_start`, one extra restart begins at
/// the given parameters before the `cfg.restarts` random ones.
pub fn fit_hyperparameters_with<R: Rng + ?Sized>(
    data: &Dataset,
    d: usize,
    structure: EmbeddingStructure,
    cfg: &AdamConfig,
    warm_start: Option<&MahaKernelParams>,
    rng: &mut R,
) -> Result<FitReport> {
    let dim = data
        .dim()
        .ok_or_else(|| Error::InvalidArgument("hyperparameter fitting needs data".into()))?;
    if data.len() < 2 {
        return Err(Error::InvalidArgument("hyperparameter fitting needs N >= 2".into()));
    }
    if d == 0 || d > dim {
        return Err(Error::InvalidArgument(format!("embedding dimension {d} not in 1..={dim}")));
    }
    if structure == EmbeddingStructure::Diagonal && d != dim {
        return Err(Error::InvalidArgument("diagonal embedding requires d = D".into()));
    }

    let mut starts = Vec::new();
    if let Some(w) = warm_start {
        if w.embed_dim() == d && w.input_dim() == dim {
            starts.push(w.clone());
        }
    }
    for _ in 0..cfg.restarts {
        starts.push(random_start(data, d, structure, rng)?);
    }
    if starts.is_empty() {
        return Err(Error::InvalidArgument("no restarts configured".into()));
    }

    let mut best: Option<(f64, MahaKernelParams)> = None;
    let mut trace = Vec::new();
    let mut initial_lml = Vec::new();
    let mut failed = 0;
    for start in &starts {
        let run = adam_run(data, start, structure, cfg);
        trace.extend(run.trace);
        initial_lml.push(run.initial);
        match run.best {
            Some((v, p)) => {
                if best.as_ref().map_or(true, |(b, _)| v > *b) {
                    best = Some((v, p));
                }
            }
            None => failed += 1,
        }
    }
    let Some((mut lml, mut params)) = best else {
        return Err(Error::NumericalFailure("every hyperparameter restart failed".into()));
    };

    let mut perturbed = false;
    if structure == EmbeddingStructure::Full && !params.has_full_rank() {
        perturbed = true;
        let noise = Normal::new(0.0, 1e-6).expect("valid normal");
        let b = params.embedding().map(|v| v + noise.sample(rng));
        let start = MahaKernelParams::new(params.gamma(), b, params.noise_var())?;
        let run = adam_run(data, &start, structure, cfg);
        trace.extend(run.trace);
        match run.best {
            Some((v, p)) if p.has_full_rank() => {
                lml = v;
                params = p;
            }
            _ => {
                lml = log_marginal_likelihood(data, &start).map(|(v, _)| v).unwrap_or(f64::NAN);
                params = start;
            }
        }
    }

    Ok(FitReport { params, lml, trace, initial_lml, failed_restarts: failed, perturbed })
}

/// RBF-ARD fitting through the dedicated per-coordinate likelihood. Draws
/// its initial length scales exactly like the diagonal Mahalanobis path, so
/// the two produce the same trajectory for the same RNG state.
pub fn fit_ard_hyperparameters<R: Rng + ?Sized>(
    data: &Dataset,
    cfg: &AdamConfig,
    warm_start: Option<&MahaKernelParams>,
    rng: &mut R,
) -> Result<FitReport> {
    let dim = data
        .dim()
        .ok_or_else(|| Error::InvalidArgument("hyperparameter fitting needs data".into()))?;
    if data.len() < 2 {
        return Err(Error::InvalidArgument("hyperparameter fitting needs N >= 2".into()));
    }
    let mut starts: Vec<Vec<f64>> = Vec::new();
    if let Some(w) = warm_start {
        if w.embed_dim() == dim && w.input_dim() == dim {
            let mut theta = vec![w.gamma().ln(), w.noise_var().ln()];
            theta.extend(w.embedding().diagonal().iter());
            starts.push(theta);
        }
    }
    let scale = 1.0 / (dim as f64).sqrt();
    let (gamma0, noise0) = initial_scales(data);
    for _ in 0..cfg.restarts {
        let mut theta = vec![gamma0.ln(), noise0.ln()];
        for _ in 0..dim {
            let v: f64 = StandardNormal.sample(rng);
            theta.push(v * scale);
        }
        starts.push(theta);
    }

    let floor = MIN_NOISE_VAR.ln();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut trace = Vec::new();
    let mut initial_lml = Vec::new();
    let mut failed = 0;
    for start in starts {
        let mut theta = start;
        theta[1] = theta[1].max(floor);
        let mut adam = Adam::new(theta.len(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);
        let mut any = false;
        let mut first = f64::NAN;
        for it in 0..cfg.iterations.max(1) {
            let Ok((value, lg, ln, gb)) =
                ard_log_marginal_likelihood(data, theta[0].exp(), &theta[2..], theta[1].exp())
            else {
                break;
            };
            if it == 0 {
                first = value;
            }
            any = true;
            trace.push(value);
            if best.as_ref().map_or(true, |(b, _)| value > *b) {
                best = Some((value, theta.clone()));
            }
            let mut g = vec![lg, ln];
            g.extend(gb);
            adam.ascend(&mut theta, &g);
            theta[1] = theta[1].max(floor);
        }
        initial_lml.push(first);
        if !any {
            failed += 1;
        }
    }
    let Some((lml, theta)) = best else {
        return Err(Error::NumericalFailure("every hyperparameter restart failed".into()));
    };
    let params = MahaKernelParams::ard(theta[0].exp(), &theta[2..], theta[1].exp())?;
    Ok(FitReport { params, lml, trace, initial_lml, failed_restarts: failed, perturbed: false })
}
