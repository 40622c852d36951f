//! Benchmark objectives: analytic base functions lifted to `[-1, 1]^D`
//! through a random row-normalized embedding, and an external-process
//! objective.

mod external;
mod functions;
pub mod sobol;

pub use external::ExternalObjective;
pub use functions::BaseFunction;
pub use sobol::sobol_init;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::domain::BoxDomain;
use crate::error::{dim_mismatch, Error, Result};

/// Anything the harness can query.
pub trait Objective {
    fn domain(&self) -> &BoxDomain;

    /// One (possibly noisy) evaluation. `rng` drives the observation noise.
    fn evaluate(&mut self, x: &[f64], rng: &mut dyn rand::Rng) -> Result<f64>;
}

/// `f(x) = f~(Ax) + eps` on `[-1, 1]^D`.
#[derive(Clone, Debug)]
pub struct EmbeddedProblem {
    a: DMatrix<f64>,
    base: BaseFunction,
    noise_sd: f64,
    domain: BoxDomain,
}

impl EmbeddedProblem {
    /// Wraps an explicit embedding. Rows must have unit L1 norm so that
    /// `[-1, 1]^D` maps into `[-1, 1]^d`.
    pub fn with_embedding(base: BaseFunction, a: DMatrix<f64>, noise_sd: f64) -> Result<Self> {
        if a.nrows() != base.d_true() {
            return Err(dim_mismatch("embedding rows", base.d_true(), a.nrows()));
        }
        if a.ncols() < base.d_true() {
            return Err(Error::InvalidArgument("embedding needs D >= d_true".into()));
        }
        if !(noise_sd >= 0.0) {
            return Err(Error::InvalidArgument("noise_sd must be nonnegative".into()));
        }
        for i in 0..a.nrows() {
            let s: f64 = a.row(i).iter().map(|v| v.abs()).sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!("embedding row {i} has L1 norm {s}")));
            }
        }
        let domain = BoxDomain::unit(a.ncols());
        Ok(Self { a, base, noise_sd, domain })
    }

    pub fn embedding(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn base(&self) -> BaseFunction {
        self.base
    }

    pub fn noise_sd(&self) -> f64 {
        self.noise_sd
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        (&self.a * DVector::from_column_slice(x)).as_slice().to_vec()
    }

    /// Noise-free value.
    pub fn eval_clean(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(dim_mismatch("objective input", self.dim(), x.len()));
        }
        if !self.domain.contains(x) {
            return Err(Error::InvalidArgument("objective input outside [-1, 1]^D".into()));
        }
        let mut z = self.project(x);
        // containment holds analytically; rounding can leave 1 + 1ulp
        z.iter_mut().for_each(|v| *v = v.clamp(-1.0, 1.0));
        Ok(self.base.eval_normalized(&z))
    }
}

/// Draws `A~` with i.i.d. standard normal entries and normalizes each row by
/// its L1 norm.
pub fn make_embedded_problem<R: Rng + ?Sized>(
    base: BaseFunction,
    dim: usize,
    noise_sd: f64,
    rng: &mut R,
) -> Result<EmbeddedProblem> {
    let d = base.d_true();
    if dim < d {
        return Err(Error::InvalidArgument(format!("D = {dim} is below d_true = {d}")));
    }
    let mut a = DMatrix::from_fn(d, dim, |_, _| {
        let v: f64 = StandardNormal.sample(rng);
        v
    });
    for i in 0..d {
        let s: f64 = a.row(i).iter().map(|v| v.abs()).sum();
        a.row_mut(i).iter_mut().for_each(|v| *v /= s);
    }
    // renormalize once more so the L1 norm is 1 to rounding
    for i in 0..d {
        let s: f64 = a.row(i).iter().map(|v| v.abs()).sum();
        a.row_mut(i).iter_mut().for_each(|v| *v /= s);
    }
    EmbeddedProblem::with_embedding(base, a, noise_sd)
}

/// `f~(Ax) + N(0, noise_sd^2)`.
pub fn eval_objective<R: Rng + ?Sized>(problem: &EmbeddedProblem, x: &[f64], rng: &mut R) -> Result<f64> {
    let clean = problem.eval_clean(x)?;
    if problem.noise_sd == 0.0 {
        return Ok(clean);
    }
    let n = Normal::new(0.0, problem.noise_sd).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(clean + n.sample(rng))
}

impl Objective for EmbeddedProblem {
    fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    fn evaluate(&mut self, x: &[f64], rng: &mut dyn rand::Rng) -> Result<f64> {
        eval_objective(self, x, rng)
    }
}
