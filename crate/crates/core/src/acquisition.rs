//! Confidence-bound acquisition (`mu - beta * s`) with EST-adapted `beta`,
//! its analytic gradient, and multi-start minimization over the box.
//!
//! Everything is computed on `z = Bx` and pulled back with `B^T`, so values
//! depend on `x` only through `Bx` and gradients lie in the row space of `B`.

use nalgebra::DVector;
use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::benchmarks::sobol::sobol_unit;
use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::gp::GpPosterior;
use crate::optim::{minimize_box, LbfgsbConfig};

/// Below this posterior standard deviation the acquisition is mean-only.
pub const MIN_SD: f64 = 1e-12;
/// Multiplier of the standard deviation used for the EST minimum estimate.
pub const EST_SD_MULTIPLIER: f64 = 3.0;

/// Which uncertainty term multiplies `beta`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UncertaintyScale {
    #[default]
    StdDev,
    Variance,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AcquisitionMode {
    FixedLcb,
    #[default]
    Est,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionSpec {
    pub beta: f64,
    pub mode: AcquisitionMode,
    /// EST estimate of the minimum (EST mode only).
    pub min_estimate: Option<f64>,
    #[serde(default)]
    pub scale: UncertaintyScale,
}

impl AcquisitionSpec {
    pub fn fixed(beta: f64) -> Result<Self> {
        if !(beta >= 0.0) {
            return Err(Error::InvalidArgument(format!("beta must be nonnegative, got {beta}")));
        }
        Ok(Self { beta, mode: AcquisitionMode::FixedLcb, min_estimate: None, scale: UncertaintyScale::StdDev })
    }

    pub fn with_scale(mut self, scale: UncertaintyScale) -> Self {
        self.scale = scale;
        self
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DescentMode {
    VanillaGd,
    #[default]
    QuasiNewton,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepSize {
    #[default]
    Auto,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub mode: DescentMode,
    pub gd_step: StepSize,
    pub grad_tol: f64,
    pub max_steps: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { restarts: 5, mode: DescentMode::QuasiNewton, gd_step: StepSize::Auto, grad_tol: 1e-6, max_steps: 200 }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidArgument("acquisition restarts must be >= 1".into()));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::InvalidArgument("grad_tol must be positive".into()));
        }
        if let StepSize::Fixed(s) = self.gd_step {
            if !(s > 0.0) {
                return Err(Error::InvalidArgument("fixed step must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Value and gradient of `mu + coef * s` at one point.
#[derive(Clone, Debug)]
pub struct BoundEval {
    pub value: f64,
    pub grad: Vec<f64>,
    /// The uncertainty term was dropped because `sd < MIN_SD`.
    pub mean_only: bool,
}

fn uncertainty(var: f64, scale: UncertaintyScale) -> f64 {
    match scale {
        UncertaintyScale::StdDev => var.sqrt(),
        UncertaintyScale::Variance => var,
    }
}

/// `mu(x) + coef * s(x)` without gradient; `coef = -beta` gives the LCB,
/// `coef = +beta` the UCB.
pub fn confidence_bound_value(post: &GpPosterior, coef: f64, scale: UncertaintyScale, x: &[f64]) -> Result<f64> {
    let (m, v) = post.mean_var(x)?;
    if v.sqrt() < MIN_SD {
        return Ok(m);
    }
    Ok(m + coef * uncertainty(v, scale))
}

/// `mu(x) + coef * s(x)` and its gradient with respect to `x`.
pub fn confidence_bound(post: &GpPosterior, coef: f64, scale: UncertaintyScale, x: &[f64]) -> Result<BoundEval> {
    let b = post.params().embedding();
    let z = post.params().project(x)?;
    let mom = post.moments_z(z.as_slice())?;
    let sd = mom.var.sqrt();
    let (value, gz, mean_only) = if sd < MIN_SD || coef == 0.0 {
        (mom.mean, mom.dmean.clone(), sd < MIN_SD && coef != 0.0)
    } else {
        let (u, du) = match scale {
            UncertaintyScale::StdDev => (sd, &mom.dvar / (2.0 * sd)),
            UncertaintyScale::Variance => (mom.var, mom.dvar.clone()),
        };
        (mom.mean + coef * u, &mom.dmean + coef * du, false)
    };
    let gx: DVector<f64> = b.transpose() * gz;
    Ok(BoundEval { value, grad: gx.as_slice().to_vec(), mean_only })
}

/// LCB value `mu(x) - beta * s(x)`.
pub fn lcb_value(post: &GpPosterior, spec: &AcquisitionSpec, x: &[f64]) -> Result<f64> {
    confidence_bound_value(post, -spec.beta, spec.scale, x)
}

/// LCB gradient and whether it degenerated to the mean gradient.
pub fn lcb_gradient(post: &GpPosterior, spec: &AcquisitionSpec, x: &[f64]) -> Result<(Vec<f64>, bool)> {
    let e = confidence_bound(post, -spec.beta, spec.scale, x)?;
    Ok((e.grad, e.mean_only))
}

/// Default number of quasi-random EST candidates.
pub const EST_CANDIDATES: usize = 1000;
const EST_MEAN_STARTS: usize = 3;

/// EST: estimates the minimum `m` as the smallest `mu - 3 sd` over a
/// candidate set (quasi-random points, observed inputs, local minima of the
/// mean), clipped to the best observation, and sets
/// `beta = min (mu - m) / sd` over the same candidates.
pub fn est_beta<R: Rng + ?Sized>(
    post: &GpPosterior,
    domain: &BoxDomain,
    candidates: usize,
    rng: &mut R,
) -> Result<AcquisitionSpec> {
    let best_y = post
        .best_observed()
        .ok_or_else(|| Error::InvalidArgument("EST needs at least one observation".into()))?;
    let mut cands: Vec<Vec<f64>> = Vec::new();
    if candidates > 0 {
        let skip = rng.random_range(0..1024usize);
        cands.extend(sobol_unit(domain.dim(), candidates, skip)?.iter().map(|u| domain.from_unit_cube(u)));
    }
    cands.extend(post.train_inputs().iter().cloned());

    // local minima of the mean from the best observed inputs
    let mut order: Vec<usize> = (0..post.num_train()).collect();
    order.sort_by(|&a, &b| post.train_values()[a].total_cmp(&post.train_values()[b]));
    let lcfg = LbfgsbConfig { max_iterations: 100, ..Default::default() };
    for &i in order.iter().take(EST_MEAN_STARTS) {
        let start = &post.train_inputs()[i];
        if let Ok(r) = minimize_box(
            |x| confidence_bound(post, 0.0, UncertaintyScale::StdDev, x).map(|e| (e.value, e.grad)),
            start,
            domain.lower(),
            domain.upper(),
            &lcfg,
        ) {
            cands.push(r.x);
        }
    }
    est_beta_from_candidates(post, &cands, best_y)
}

/// EST on an explicit candidate multiset.
pub fn est_beta_from_candidates(post: &GpPosterior, cands: &[Vec<f64>], best_y: f64) -> Result<AcquisitionSpec> {
    let moments: Vec<(f64, f64)> = cands
        .iter()
        .map(|x| post.mean_var(x).map(|(m, v)| (m, v.sqrt())))
        .collect::<Result<_>>()?;
    let m_hat = moments
        .iter()
        .map(|(m, s)| m - EST_SD_MULTIPLIER * s)
        .fold(f64::INFINITY, f64::min)
        .min(best_y);
    let beta = moments
        .iter()
        .filter(|(_, s)| *s > MIN_SD)
        .map(|(m, s)| (m - m_hat) / s)
        .fold(f64::INFINITY, f64::min);
    let beta = if beta.is_finite() { beta.max(0.0) } else { 0.0 };
    Ok(AcquisitionSpec { beta, mode: AcquisitionMode::Est, min_estimate: Some(m_hat), scale: UncertaintyScale::StdDev })
}

/// Result of acquisition minimization.
#[derive(Clone, Debug)]
pub struct AcquisitionOptimum {
    pub x: Vec<f64>,
    pub value: f64,
    /// Number of restarts that ended inside the domain.
    pub converged: usize,
    /// Every restart left the domain; `x` is the best clipped exit point.
    pub degraded: bool,
    /// Initial point of the winning restart.
    pub start: Vec<f64>,
}

/// Per-step record of a vanilla gradient descent run.
#[derive(Clone, Debug)]
pub struct DescentTrace {
    pub values: Vec<f64>,
    pub exited: bool,
    pub final_x: Vec<f64>,
    pub final_grad_norm: f64,
}

/// Heuristic Lipschitz constant of the `z`-gradient of the acquisition.
///
/// The RBF kernel's Hessian has norm at most `2 gamma^2`, which bounds the
/// mean term by `2 gamma^2 |alpha|_1`; the uncertainty term adds `4 beta gamma`.
pub fn lipschitz_estimate(post: &GpPosterior, beta: f64) -> f64 {
    let g = post.params().gamma();
    let a1: f64 = post.alpha().iter().map(|v| v.abs()).sum();
    2.0 * g * g * a1.max(1.0) + 4.0 * beta * g
}

fn auto_step(post: &GpPosterior, beta: f64) -> f64 {
    let b = post.params().embedding();
    let bn = b.clone().singular_values().iter().cloned().fold(0.0, f64::max).max(1e-12);
    1.0 / (bn * bn * lipschitz_estimate(post, beta))
}

/// Gradient descent from `x0` with the configured step, halving the step
/// whenever it would increase the acquisition. Stops when the gradient norm
/// falls below `grad_tol`, the iterate leaves the box, or `max_steps` is hit.
pub fn vanilla_descent(
    post: &GpPosterior,
    spec: &AcquisitionSpec,
    domain: &BoxDomain,
    cfg: &OptimizerConfig,
    x0: &[f64],
) -> Result<DescentTrace> {
    let step0 = match cfg.gd_step {
        StepSize::Auto => auto_step(post, spec.beta),
        StepSize::Fixed(s) => s,
    };
    let mut x = x0.to_vec();
    let mut cur = confidence_bound(post, -spec.beta, spec.scale, &x)?;
    let mut values = vec![cur.value];
    for _ in 0..cfg.max_steps {
        let gnorm = cur.grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm < cfg.grad_tol {
            return Ok(DescentTrace { values, exited: false, final_x: x, final_grad_norm: gnorm });
        }
        let mut step = step0;
        let mut next = None;
        for _ in 0..60 {
            let xn: Vec<f64> = x.iter().zip(&cur.grad).map(|(a, g)| a - step * g).collect();
            if !domain.contains(&xn) {
                return Ok(DescentTrace { values, exited: true, final_x: xn, final_grad_norm: gnorm });
            }
            let e = confidence_bound(post, -spec.beta, spec.scale, &xn)?;
            if e.value <= cur.value + 1e-12 {
                next = Some((xn, e));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, e)) = next else { break };
        x = xn;
        cur = e;
        values.push(cur.value);
    }
    let gnorm = cur.grad.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(DescentTrace { values, exited: false, final_x: x, final_grad_norm: gnorm })
}

/// Uniform prior sampler on the box.
pub fn uniform_prior<R: Rng + ?Sized>(domain: &BoxDomain) -> impl FnMut(&mut R) -> Vec<f64> + '_ {
    move |rng: &mut R| domain.sample_uniform(rng)
}

/// Multi-start minimization of the LCB over the box from prior samples.
pub fn optimize_acquisition<R, P>(
    post: &GpPosterior,
    spec: &AcquisitionSpec,
    domain: &BoxDomain,
    cfg: &OptimizerConfig,
    prior_sampler: &mut P,
    rng: &mut R,
) -> Result<AcquisitionOptimum>
where
    R: Rng + ?Sized,
    P: FnMut(&mut R) -> Vec<f64>,
{
    cfg.validate()?;
    if domain.dim() != post.input_dim() {
        return Err(crate::error::dim_mismatch("acquisition domain", post.input_dim(), domain.dim()));
    }
    let starts: Vec<Vec<f64>> = (0..cfg.restarts).map(|_| prior_sampler(rng)).collect();
    let mut best: Option<AcquisitionOptimum> = None;
    let mut fallback: Option<(Vec<f64>, f64, Vec<f64>)> = None;
    let mut converged = 0;
    for x0 in starts {
        let (x, value) = match cfg.mode {
            DescentMode::VanillaGd => {
                let t = vanilla_descent(post, spec, domain, cfg, &x0)?;
                if t.exited {
                    let mut xc = t.final_x;
                    domain.clip(&mut xc);
                    let v = lcb_value(post, spec, &xc)?;
                    if fallback.as_ref().map_or(true, |(_, fv, _)| v < *fv) {
                        fallback = Some((xc, v, x0));
                    }
                    continue;
                }
                let v = *t.values.last().expect("at least the start value");
                (t.final_x, v)
            }
            DescentMode::QuasiNewton => {
                let lcfg = LbfgsbConfig { max_iterations: cfg.max_steps, pg_tol: cfg.grad_tol, ..Default::default() };
                let r = minimize_box(
                    |x| confidence_bound(post, -spec.beta, spec.scale, x).map(|e| (e.value, e.grad)),
                    &x0,
                    domain.lower(),
                    domain.upper(),
                    &lcfg,
                )?;
                (r.x, r.value)
            }
        };
        converged += 1;
        if best.as_ref().map_or(true, |b| value < b.value) {
            best = Some(AcquisitionOptimum { x, value, converged: 0, degraded: false, start: x0 });
        }
    }
    match best {
        Some(mut b) => {
            b.converged = converged;
            Ok(b)
        }
        None => {
            let (x, value, start) = fallback.expect("restarts >= 1");
            Ok(AcquisitionOptimum { x, value, converged: 0, degraded: true, start })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Dataset;
    use crate::gp::{fit_posterior, MahaKernelParams};
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_post() -> GpPosterior {
        let dom = BoxDomain::unit(3);
        let p = MahaKernelParams::new(1.0, DMatrix::from_row_slice(1, 3, &[0.8, -0.5, 0.3]), 0.01).unwrap();
        let pts = vec![vec![0.1, 0.2, 0.3], vec![-0.4, 0.6, -0.2], vec![0.9, -0.9, 0.5]];
        let ds = Dataset::from_parts(&dom, pts, vec![0.5, -1.0, 1.2]).unwrap();
        fit_posterior(&ds, &p).unwrap()
    }

    #[test]
    fn beta_zero_is_mean() {
        let post = toy_post();
        let spec = AcquisitionSpec::fixed(0.0).unwrap();
        let x = [0.3, -0.1, 0.2];
        assert_eq!(lcb_value(&post, &spec, &x).unwrap(), post.mean_var(&x).unwrap().0);
    }

    #[test]
    fn prior_lcb_is_minus_beta_gamma() {
        let p = MahaKernelParams::new(1.0, DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), 0.1).unwrap();
        let post = fit_posterior(&Dataset::new(), &p).unwrap();
        let spec = AcquisitionSpec::fixed(2.0).unwrap();
        assert_eq!(lcb_value(&post, &spec, &[0.4, -0.7]).unwrap(), -2.0);
        let (g, flagged) = lcb_gradient(&post, &spec, &[0.4, -0.7]).unwrap();
        assert!(!flagged);
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn negative_beta_rejected() {
        assert!(AcquisitionSpec::fixed(-0.1).is_err());
    }

    #[test]
    fn variance_scale_switch() {
        let post = toy_post();
        let x = [0.0, 0.1, 0.0];
        let (m, v) = post.mean_var(&x).unwrap();
        let spec = AcquisitionSpec::fixed(1.5).unwrap().with_scale(UncertaintyScale::Variance);
        assert!((lcb_value(&post, &spec, &x).unwrap() - (m - 1.5 * v)).abs() < 1e-14);
    }

    #[test]
    fn est_is_invariant_to_duplicates() {
        let post = toy_post();
        let cands = vec![vec![0.0, 0.0, 0.0], vec![0.5, 0.5, -0.5], vec![-0.2, 0.9, 0.1]];
        let mut dup = cands.clone();
        dup.extend(cands.clone());
        let a = est_beta_from_candidates(&post, &cands, -1.0).unwrap();
        let b = est_beta_from_candidates(&post, &dup, -1.0).unwrap();
        assert_eq!(a, b);
        assert!(a.beta >= 0.0);
        assert!(a.min_estimate.unwrap() <= -1.0);
    }

    #[test]
    fn quasi_newton_stays_in_box() {
        let post = toy_post();
        let dom = BoxDomain::unit(3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = AcquisitionSpec::fixed(1.0).unwrap();
        let mut prior = uniform_prior(&dom);
        let r = optimize_acquisition(&post, &spec, &dom, &OptimizerConfig::default(), &mut prior, &mut rng).unwrap();
        assert!(dom.contains(&r.x));
        assert!(!r.degraded);
        assert_eq!(r.converged, 5);
    }

    #[test]
    fn vanilla_descent_is_monotone() {
        let post = toy_post();
        let dom = BoxDomain::unit(3);
        let spec = AcquisitionSpec::fixed(1.0).unwrap();
        let cfg = OptimizerConfig { mode: DescentMode::VanillaGd, max_steps: 300, ..Default::default() };
        let t = vanilla_descent(&post, &spec, &dom, &cfg, &[0.05, 0.02, -0.03]).unwrap();
        for w in t.values.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }
}
