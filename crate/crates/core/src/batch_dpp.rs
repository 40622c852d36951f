//! Batch completion with a continuous k-DPP.
//!
//! The first query minimizes the LCB. The remaining `k = n_batch - 1` points
//! are drawn from a k-DPP whose kernel is the posterior covariance after
//! conditioning on the first query (the small-noise limit of the usual DPP
//! kernel), restricted to the relevant region
//! `{x : mu(x) - lambda beta s(x) <= min_x' mu(x') + beta s(x')}`.
//! The region uses the posterior from before conditioning.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::acquisition::{
    confidence_bound, confidence_bound_value, optimize_acquisition, uniform_prior, AcquisitionOptimum,
    AcquisitionSpec, OptimizerConfig, UncertaintyScale,
};
use crate::benchmarks::sobol::sobol_unit;
use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::flags::{Flag, Flags};
use crate::gp::GpPosterior;
use crate::linalg::logdet_psd;
use crate::optim::{minimize_box, LbfgsbConfig};

/// Above this lambda the region is declared degenerate.
pub const LAMBDA_MAX: f64 = 1e6;
/// `ln(1e-300)`: sets with a smaller determinant are treated as singular
/// during initialization.
pub const MIN_INIT_LOGDET: f64 = -690.775_527_898_213_7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DppConfig {
    /// Gibbs steps per chain; `None` means `4 k^2`.
    pub gibbs_steps: Option<usize>,
    pub lambda_init: f64,
    pub lambda_growth: f64,
    /// Consecutive rejections tolerated before lambda grows.
    pub rejection_budget: usize,
    /// Attempts at drawing a nonsingular starting set.
    pub init_budget: usize,
}

impl Default for DppConfig {
    fn default() -> Self {
        Self { gibbs_steps: None, lambda_init: 2.0, lambda_growth: 1.5, rejection_budget: 5000, init_budget: 100 }
    }
}

impl DppConfig {
    pub fn steps_for(&self, k: usize) -> usize {
        self.gibbs_steps.unwrap_or(4 * k * k)
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        if k == 0 {
            return Err(Error::InvalidArgument("k-DPP needs k >= 1".into()));
        }
        if self.steps_for(k) < k * k {
            return Err(Error::InvalidArgument(format!(
                "gibbs_steps = {} is below k^2 = {}",
                self.steps_for(k),
                k * k
            )));
        }
        if !(self.lambda_init >= 1.0) || !(self.lambda_growth > 1.0) {
            return Err(Error::InvalidArgument("need lambda_init >= 1 and lambda_growth > 1".into()));
        }
        if self.rejection_budget == 0 || self.init_budget == 0 {
            return Err(Error::InvalidArgument("budgets must be positive".into()));
        }
        Ok(())
    }
}

/// Posterior conditioned on a pending query. Only its covariance is used.
pub fn condition_on_pending(post: &GpPosterior, x_pending: &[f64]) -> Result<GpPosterior> {
    post.condition_on(x_pending)
}

/// DPP kernel `L(x, x2) = kappa_{t,1}(x, x2)`.
pub fn dpp_kernel_eval(cond: &GpPosterior, x: &[f64], x2: &[f64]) -> Result<f64> {
    let v = cond.covariance(x, x2)?;
    if x == x2 && v < 0.0 && v >= -1e-10 {
        return Ok(0.0);
    }
    Ok(v)
}

/// DPP kernel matrix of a set of points.
pub fn dpp_kernel_matrix(cond: &GpPosterior, xs: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let zs: Vec<DVector<f64>> = xs.iter().map(|x| cond.params().project(x)).collect::<Result<_>>()?;
    let mut m = cond.covariance_matrix_z(&zs)?;
    for i in 0..m.nrows() {
        if m[(i, i)] < 0.0 && m[(i, i)] >= -1e-10 {
            m[(i, i)] = 0.0;
        }
    }
    Ok(m)
}

const MIN_UCB_SCREEN: usize = 256;

/// Multi-start quasi-Newton minimum of `mu + beta s` over the box. The
/// result is the best value found, an upper bound on the true minimum.
pub fn min_ucb<R: Rng + ?Sized>(
    post: &GpPosterior,
    beta: f64,
    scale: UncertaintyScale,
    domain: &BoxDomain,
    cfg: &OptimizerConfig,
    rng: &mut R,
) -> Result<f64> {
    let mut screen: Vec<Vec<f64>> = post.train_inputs().to_vec();
    let skip = rng.random_range(0..1024usize);
    screen.extend(sobol_unit(domain.dim(), MIN_UCB_SCREEN, skip)?.iter().map(|u| domain.from_unit_cube(u)));
    let mut scored: Vec<(f64, Vec<f64>)> = screen
        .into_iter()
        .map(|x| confidence_bound_value(post, beta, scale, &x).map(|v| (v, x)))
        .collect::<Result<_>>()?;
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = scored.first().map_or(f64::INFINITY, |s| s.0);
    let mut starts: Vec<Vec<f64>> = scored.into_iter().take(cfg.restarts).map(|s| s.1).collect();
    starts.extend((0..cfg.restarts).map(|_| domain.sample_uniform(rng)));
    let lcfg = LbfgsbConfig { max_iterations: cfg.max_steps, pg_tol: cfg.grad_tol, ..Default::default() };
    for x0 in starts {
        let r = minimize_box(
            |x| confidence_bound(post, beta, scale, x).map(|e| (e.value, e.grad)),
            &x0,
            domain.lower(),
            domain.upper(),
            &lcfg,
        )?;
        best = best.min(r.value);
    }
    Ok(best)
}

/// Sublevel set `mu - lambda beta s <= ucb_min` of the pre-batch posterior.
#[derive(Clone, Debug)]
pub struct RelevantRegion<'a> {
    pub post: &'a GpPosterior,
    pub beta: f64,
    pub lambda: f64,
    pub ucb_min: f64,
    pub scale: UncertaintyScale,
}

impl<'a> RelevantRegion<'a> {
    pub fn new(post: &'a GpPosterior, beta: f64, lambda: f64, ucb_min: f64, scale: UncertaintyScale) -> Result<Self> {
        if !(lambda >= 1.0) {
            return Err(Error::InvalidArgument(format!("lambda must be >= 1, got {lambda}")));
        }
        Ok(Self { post, beta, lambda, ucb_min, scale })
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        Ok(self.contains_at(x, self.lambda)?)
    }

    pub fn contains_at(&self, x: &[f64], lambda: f64) -> Result<bool> {
        let v = confidence_bound_value(self.post, -lambda * self.beta, self.scale, x)?;
        Ok(v <= self.ucb_min)
    }
}

/// Uniform sample of the region by rejection from the box. After
/// `rejection_budget` consecutive rejections lambda is multiplied by
/// `lambda_growth`; the grown lambda stays in `region`.
pub fn sample_relevant_region<R: Rng + ?Sized>(
    region: &mut RelevantRegion<'_>,
    domain: &BoxDomain,
    cfg: &DppConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    loop {
        for _ in 0..cfg.rejection_budget {
            let x = domain.sample_uniform(rng);
            if region.contains(&x)? {
                return Ok(x);
            }
        }
        region.lambda *= cfg.lambda_growth;
        if region.lambda > LAMBDA_MAX {
            return Err(Error::RegionDegenerate { lambda: region.lambda });
        }
    }
}

/// One proposed Gibbs move.
#[derive(Clone, Debug)]
pub struct Transition {
    pub index: usize,
    pub logdet_current: f64,
    pub logdet_proposed: f64,
    pub accept_prob: f64,
    pub accepted: bool,
}

#[derive(Clone, Debug)]
pub struct KdppSample<T> {
    pub points: Vec<T>,
    pub logdet: f64,
    /// Initialization failed; `points` are independent ground samples.
    pub degraded: bool,
    pub transitions: Vec<Transition>,
}

/// Metropolis-within-Gibbs sampler for a continuous k-DPP.
///
/// Starting from `k` ground samples with a nonsingular kernel minor, each step
/// replaces a uniformly chosen member by a fresh ground sample with
/// probability `min(1, det L_{S'} / det L_S)`.
pub fn sample_kdpp_gibbs<T, K, G, R>(
    k: usize,
    kernel_matrix: K,
    mut ground: G,
    cfg: &DppConfig,
    rng: &mut R,
) -> Result<KdppSample<T>>
where
    T: Clone,
    K: Fn(&[T]) -> Result<DMatrix<f64>>,
    G: FnMut(&mut R) -> Result<T>,
    R: Rng + ?Sized,
{
    cfg.validate(k)?;
    let mut init = None;
    for _ in 0..cfg.init_budget {
        let s: Vec<T> = (0..k).map(|_| ground(rng)).collect::<Result<_>>()?;
        let ld = logdet_psd(&kernel_matrix(&s)?);
        if ld > MIN_INIT_LOGDET {
            init = Some((s, ld));
            break;
        }
    }
    let Some((mut set, mut logdet)) = init else {
        let points: Vec<T> = (0..k).map(|_| ground(rng)).collect::<Result<_>>()?;
        let logdet = logdet_psd(&kernel_matrix(&points)?);
        return Ok(KdppSample { points, logdet, degraded: true, transitions: Vec::new() });
    };

    let steps = cfg.steps_for(k);
    let mut transitions = Vec::with_capacity(steps);
    for _ in 0..steps {
        let index = rng.random_range(0..k);
        let proposal = ground(rng)?;
        let mut candidate = set.clone();
        candidate[index] = proposal;
        let ld_new = logdet_psd(&kernel_matrix(&candidate)?);
        let accept_prob = if ld_new == f64::NEG_INFINITY { 0.0 } else { (ld_new - logdet).exp().min(1.0) };
        let accepted = accept_prob > 0.0 && rng.random::<f64>() < accept_prob;
        transitions.push(Transition { index, logdet_current: logdet, logdet_proposed: ld_new, accept_prob, accepted });
        if accepted {
            set = candidate;
            logdet = ld_new;
        }
    }
    Ok(KdppSample { points: set, logdet, degraded: false, transitions })
}

#[derive(Clone, Debug)]
pub struct BatchSelection {
    pub points: Vec<Vec<f64>>,
    pub first: AcquisitionOptimum,
    /// Lambda in effect when sampling finished (batch size > 1 only).
    pub final_lambda: Option<f64>,
    pub ucb_min: Option<f64>,
    pub dpp_logdet: Option<f64>,
    pub flags: Flags,
}

/// One-step batch selection: LCB minimizer, then a k-DPP completion over the
/// relevant region with the conditioned covariance as kernel.
pub fn select_batch<R: Rng + ?Sized>(
    post: &GpPosterior,
    domain: &BoxDomain,
    n_batch: usize,
    spec: &AcquisitionSpec,
    acq_cfg: &OptimizerConfig,
    dpp_cfg: &DppConfig,
    rng: &mut R,
) -> Result<BatchSelection> {
    if n_batch == 0 {
        return Err(Error::InvalidArgument("n_batch must be >= 1".into()));
    }
    let mut flags = Flags::new();
    let mut prior = uniform_prior::<R>(domain);
    let first = optimize_acquisition(post, spec, domain, acq_cfg, &mut prior, rng)?;
    if first.degraded {
        flags.insert(Flag::AcquisitionDegraded);
    }
    let mut points = vec![first.x.clone()];
    if n_batch == 1 {
        return Ok(BatchSelection { points, first, final_lambda: None, ucb_min: None, dpp_logdet: None, flags });
    }
    let k = n_batch - 1;
    dpp_cfg.validate(k)?;

    let cond = condition_on_pending(post, &first.x)?;
    let ucb_min = min_ucb(post, spec.beta, spec.scale, domain, acq_cfg, rng)?;
    let region = RelevantRegion::new(post, spec.beta, dpp_cfg.lambda_init, ucb_min, spec.scale)?;
    let region = std::cell::RefCell::new(region);
    let sample = sample_kdpp_gibbs(
        k,
        |xs: &[Vec<f64>]| dpp_kernel_matrix(&cond, xs),
        |rng: &mut R| sample_relevant_region(&mut region.borrow_mut(), domain, dpp_cfg, rng),
        dpp_cfg,
        rng,
    )?;
    let final_lambda = region.borrow().lambda;
    if final_lambda > dpp_cfg.lambda_init {
        flags.insert(Flag::LambdaGrown);
    }
    if sample.degraded {
        flags.insert(Flag::DppInitFallback);
    }
    points.extend(sample.points);
    Ok(BatchSelection {
        points,
        first,
        final_lambda: Some(final_lambda),
        ucb_min: Some(ucb_min),
        dpp_logdet: Some(sample.logdet),
        flags,
    })
}
