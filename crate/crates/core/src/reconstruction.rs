//! Reconstruction of high-dimensional queries from embedded ones, and the
//! two-step baselines built on it.
//!
//! Every `x` splits uniquely as `x = B+ (Bx) + w` with `w` in the null space
//! of `B`. The pseudo-inverse map always returns `w = 0`; the randomized map
//! keeps the `w` of a prior sample, which makes it unbiased when the prior is
//! uniform along the preimage.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::acquisition::{optimize_acquisition, uniform_prior, AcquisitionSpec, OptimizerConfig};
use crate::batch_dpp::{select_batch, DppConfig};
use crate::domain::{BoxDomain, Dataset};
use crate::error::{dim_mismatch, Error, Result};
use crate::flags::{Flag, Flags};
use crate::gp::{fit_posterior, GpPosterior, MahaKernelParams, RANK_TOL};
use crate::linalg::has_full_row_rank;

/// Success threshold on `0.5 |Bx - z|^2`.
pub const RECONSTRUCTION_TOL: f64 = 1e-12;
pub const RECONSTRUCTION_INIT_BUDGET: usize = 100;
/// Descent steps allowed per initialization before it counts as failed.
pub const MAX_STEPS_PER_INIT: usize = 1000;

/// `B` together with its Moore-Penrose pseudo-inverse `B^T (B B^T)^-1`.
#[derive(Clone, Debug)]
pub struct LinearEmbedding {
    b: DMatrix<f64>,
    pinv: DMatrix<f64>,
}

impl LinearEmbedding {
    pub fn new(b: DMatrix<f64>) -> Result<Self> {
        if b.nrows() == 0 || b.nrows() > b.ncols() {
            return Err(Error::InvalidArgument(format!(
                "embedding must be d x D with 1 <= d <= D, got {} x {}",
                b.nrows(),
                b.ncols()
            )));
        }
        if !has_full_row_rank(&b, RANK_TOL) {
            return Err(Error::NumericalFailure("embedding is rank-deficient".into()));
        }
        let gram = &b * b.transpose();
        let chol = gram
            .cholesky()
            .ok_or_else(|| Error::NumericalFailure("B B^T is not positive definite".into()))?;
        let pinv = b.transpose() * chol.inverse();
        Ok(Self { b, pinv })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn pinv(&self) -> &DMatrix<f64> {
        &self.pinv
    }

    pub fn embed_dim(&self) -> usize {
        self.b.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    /// `I - B+ B`, built on demand since it is `D x D`.
    pub fn null_projector(&self) -> DMatrix<f64> {
        let d = self.input_dim();
        DMatrix::identity(d, d) - &self.pinv * &self.b
    }

    pub fn project(&self, x: &[f64]) -> Result<DVector<f64>> {
        if x.len() != self.input_dim() {
            return Err(dim_mismatch("point", self.input_dim(), x.len()));
        }
        Ok(&self.b * DVector::from_column_slice(x))
    }
}

/// `B+ z`. May lie outside the box.
pub fn pseudo_inverse_map(emb: &LinearEmbedding, z: &[f64]) -> Result<Vec<f64>> {
    if z.len() != emb.embed_dim() {
        return Err(dim_mismatch("embedded point", emb.embed_dim(), z.len()));
    }
    Ok((emb.pinv() * DVector::from_column_slice(z)).as_slice().to_vec())
}

/// `B+ z` clipped to the box; the flag reports whether clipping happened.
pub fn clipped_pseudo_inverse(emb: &LinearEmbedding, z: &[f64], domain: &BoxDomain) -> Result<(Vec<f64>, bool)> {
    let mut x = pseudo_inverse_map(emb, z)?;
    let clipped = domain.clip(&mut x);
    Ok((x, clipped))
}

/// `w = x - B+ B x`, computed without forming the projector.
pub fn null_space_component(emb: &LinearEmbedding, x: &[f64]) -> Result<Vec<f64>> {
    let xv = DVector::from_column_slice(x);
    let z = emb.project(x)?;
    Ok((xv - emb.pinv() * z).as_slice().to_vec())
}

#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub x: Vec<f64>,
    /// Starting point of the successful run (`None` on fallback).
    pub init: Option<Vec<f64>>,
    pub inits_used: usize,
    pub steps: usize,
    pub fallback: bool,
    /// Fallback point needed clipping.
    pub clipped: bool,
}

/// Randomized reconstruction by steepest descent on `0.5 |Bx - z_q|^2`.
///
/// Each run starts at a prior sample and takes exact line-search steps
/// `x <- x - g B^T r` with `g = |B^T r|^2 / |B B^T r|^2`. Steps lie in the row
/// space of `B`, so the null-space part of the start survives. A run that
/// leaves the box is abandoned and a new prior sample drawn. After
/// `init_budget` failed runs the clipped pseudo-inverse is returned.
pub fn randomized_reconstruct<R, P>(
    emb: &LinearEmbedding,
    z_q: &[f64],
    prior_sampler: &mut P,
    domain: &BoxDomain,
    tol: f64,
    init_budget: usize,
    rng: &mut R,
) -> Result<Reconstruction>
where
    R: Rng + ?Sized,
    P: FnMut(&mut R) -> Vec<f64>,
{
    if z_q.len() != emb.embed_dim() {
        return Err(dim_mismatch("embedded query", emb.embed_dim(), z_q.len()));
    }
    if domain.dim() != emb.input_dim() {
        return Err(dim_mismatch("reconstruction domain", emb.input_dim(), domain.dim()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let b = emb.matrix();
    let zq = DVector::from_column_slice(z_q);
    let mut steps = 0;
    for attempt in 1..=init_budget {
        let init = prior_sampler(rng);
        if init.len() != domain.dim() {
            return Err(dim_mismatch("prior sample", domain.dim(), init.len()));
        }
        let mut x = DVector::from_column_slice(&init);
        for _ in 0..=MAX_STEPS_PER_INIT {
            let r = b * &x - &zq;
            if 0.5 * r.norm_squared() <= tol {
                return Ok(Reconstruction {
                    x: x.as_slice().to_vec(),
                    init: Some(init),
                    inits_used: attempt,
                    steps,
                    fallback: false,
                    clipped: false,
                });
            }
            let g = b.transpose() * &r;
            let bg = b * &g;
            let denom = bg.norm_squared();
            if denom == 0.0 {
                break;
            }
            x -= (g.norm_squared() / denom) * g;
            steps += 1;
            if !domain.contains(x.as_slice()) {
                break;
            }
        }
    }
    let (x, clipped) = clipped_pseudo_inverse(emb, z_q, domain)?;
    Ok(Reconstruction { x, init: None, inits_used: init_budget, steps, fallback: true, clipped })
}

/// Axis-aligned bounding box of the zonotope `{Bx : x in domain}`: centre
/// `B c`, half-widths `|B| h`.
pub fn zonotope_bounding_box(b: &DMatrix<f64>, domain: &BoxDomain) -> Result<BoxDomain> {
    if b.ncols() != domain.dim() {
        return Err(dim_mismatch("zonotope generator", domain.dim(), b.ncols()));
    }
    let c = b * DVector::from_vec(domain.center());
    let h = b.abs() * DVector::from_vec(domain.half_widths());
    let mut lower = Vec::with_capacity(b.nrows());
    let mut upper = Vec::with_capacity(b.nrows());
    for i in 0..b.nrows() {
        // A zero row would give an empty box; widen it to a sliver.
        let w = h[i].max(1e-12);
        lower.push(c[i] - w);
        upper.push(c[i] + w);
    }
    BoxDomain::new(lower, upper)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReconstructionStrategy {
    Pinv,
    Randomized,
}

/// Low-dimensional GP `z -> y` equivalent to the Mahalanobis GP: an RBF
/// kernel with unit metric on `z = Bx`, over the zonotope's bounding box.
pub fn low_dim_posterior(data: &Dataset, params: &MahaKernelParams, domain: &BoxDomain) -> Result<(GpPosterior, BoxDomain)> {
    let zbox = zonotope_bounding_box(params.embedding(), domain)?;
    let zs: Vec<Vec<f64>> = data
        .points()
        .iter()
        .map(|x| {
            // Projections sit inside the box up to round-off.
            let mut z = params.project(x)?.as_slice().to_vec();
            zbox.clip(&mut z);
            Ok(z)
        })
        .collect::<Result<_>>()?;
    let zdata = Dataset::from_parts(&zbox, zs, data.values().to_vec())?;
    let post = fit_posterior(&zdata, &params.low_dim_rbf())?;
    Ok((post, zbox))
}

#[derive(Clone, Debug)]
pub struct TwoStepSelection {
    pub points: Vec<Vec<f64>>,
    pub z_points: Vec<Vec<f64>>,
    pub flags: Flags,
}

/// Two-step batch selection: optimize and DPP-complete in `z`, then map each
/// `z` back with the chosen strategy.
#[allow(clippy::too_many_arguments)]
pub fn two_step_select<R: Rng + ?Sized>(
    data: &Dataset,
    params: &MahaKernelParams,
    domain: &BoxDomain,
    n_batch: usize,
    strategy: ReconstructionStrategy,
    spec: &AcquisitionSpec,
    acq_cfg: &OptimizerConfig,
    dpp_cfg: &DppConfig,
    rng: &mut R,
) -> Result<TwoStepSelection> {
    let emb = LinearEmbedding::new(params.embedding().clone())?;
    let (zpost, zbox) = low_dim_posterior(data, params, domain)?;
    two_step_select_in(&zpost, &zbox, &emb, domain, n_batch, strategy, spec, acq_cfg, dpp_cfg, rng)
}

/// [`two_step_select`] on a prebuilt low-dimensional posterior.
#[allow(clippy::too_many_arguments)]
pub fn two_step_select_in<R: Rng + ?Sized>(
    zpost: &GpPosterior,
    zbox: &BoxDomain,
    emb: &LinearEmbedding,
    domain: &BoxDomain,
    n_batch: usize,
    strategy: ReconstructionStrategy,
    spec: &AcquisitionSpec,
    acq_cfg: &OptimizerConfig,
    dpp_cfg: &DppConfig,
    rng: &mut R,
) -> Result<TwoStepSelection> {
    let sel = select_batch(zpost, zbox, n_batch, spec, acq_cfg, dpp_cfg, rng)?;
    let mut flags = sel.flags;
    let mut points = Vec::with_capacity(n_batch);
    for z in &sel.points {
        let x = match strategy {
            ReconstructionStrategy::Pinv => {
                let (x, clipped) = clipped_pseudo_inverse(emb, z, domain)?;
                if clipped {
                    flags.insert(Flag::PinvClipped);
                }
                x
            }
            ReconstructionStrategy::Randomized => {
                let mut prior = uniform_prior::<R>(domain);
                let rec = randomized_reconstruct(
                    emb,
                    z,
                    &mut prior,
                    domain,
                    RECONSTRUCTION_TOL,
                    RECONSTRUCTION_INIT_BUDGET,
                    rng,
                )?;
                if rec.fallback {
                    flags.insert(Flag::ReconstructionFallback);
                    if rec.clipped {
                        flags.insert(Flag::PinvClipped);
                    }
                }
                rec.x
            }
        };
        points.push(x);
    }
    Ok(TwoStepSelection { points, z_points: sel.points, flags })
}

/// Low-dimensional acquisition optimum mapped through the clipped
/// pseudo-inverse (single-query two-step with `pinv`).
pub fn two_step_pinv_single<R: Rng + ?Sized>(
    data: &Dataset,
    params: &MahaKernelParams,
    domain: &BoxDomain,
    spec: &AcquisitionSpec,
    acq_cfg: &OptimizerConfig,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>, bool)> {
    let emb = LinearEmbedding::new(params.embedding().clone())?;
    let (zpost, zbox) = low_dim_posterior(data, params, domain)?;
    let mut prior = uniform_prior::<R>(&zbox);
    let opt = optimize_acquisition(&zpost, spec, &zbox, acq_cfg, &mut prior, rng)?;
    let (x, clipped) = clipped_pseudo_inverse(&emb, &opt.x, domain)?;
    Ok((x, opt.x, clipped))
}
