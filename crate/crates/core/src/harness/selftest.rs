//! Quick smoke checks run by `mahabo selftest`. The full property suites
//! live in the test targets; these cover one case per module in well under
//! a minute.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::ExperimentConfig;
use super::trial::run_trial;
use crate::acquisition::uniform_prior;
use crate::batch_dpp::{sample_kdpp_gibbs, DppConfig};
use crate::benchmarks::{make_embedded_problem, BaseFunction};
use crate::domain::{BoxDomain, Dataset};
use crate::error::Result;
use crate::gp::{fit_posterior, gram_matrix, log_marginal_likelihood, MahaKernelParams};
use crate::reconstruction::{null_space_component, randomized_reconstruct, LinearEmbedding};

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn normal_matrix(r: usize, c: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

fn toy_data(n: usize, dim: usize, rng: &mut ChaCha8Rng) -> Result<Dataset> {
    let domain = BoxDomain::unit(dim);
    let pts: Vec<Vec<f64>> = (0..n).map(|_| domain.sample_uniform(rng)).collect();
    let ys = pts.iter().map(|x| x.iter().map(|v| v.sin()).sum()).collect();
    Dataset::from_parts(&domain, pts, ys)
}

fn posterior_matches_dense() -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let data = toy_data(12, 5, &mut rng)?;
    let params = MahaKernelParams::new(1.3, normal_matrix(2, 5, &mut rng) * 0.7, 0.05)?;
    let post = fit_posterior(&data, &params)?;
    let mut c = gram_matrix(&params, data.points())?;
    for i in 0..c.nrows() {
        c[(i, i)] += params.noise_var();
    }
    let cinv = c.try_inverse().expect("invertible");
    let y = DVector::from_column_slice(data.values());
    let x = BoxDomain::unit(5).sample_uniform(&mut rng);
    let k = DVector::from_iterator(
        data.len(),
        data.points().iter().map(|p| crate::gp::kernel_eval(&params, &x, p).unwrap_or(f64::NAN)),
    );
    let mean = k.dot(&(&cinv * &y));
    let var = params.gamma().powi(2) - k.dot(&(&cinv * &k));
    let (m, v) = post.mean_var(&x)?;
    Ok((m - mean).abs().max((v - var).abs()))
}

fn lml_gradient_error() -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let data = toy_data(10, 4, &mut rng)?;
    let b = normal_matrix(2, 4, &mut rng) * 0.5;
    let params = MahaKernelParams::new(1.1, b.clone(), 0.1)?;
    let (_, g) = log_marginal_likelihood(&data, &params)?;
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for idx in 0..b.len() {
        let mut bp = b.clone();
        bp[idx] += h;
        let mut bm = b.clone();
        bm[idx] -= h;
        let fp = log_marginal_likelihood(&data, &MahaKernelParams::new(1.1, bp, 0.1)?)?.0;
        let fm = log_marginal_likelihood(&data, &MahaKernelParams::new(1.1, bm, 0.1)?)?.0;
        let fd = (fp - fm) / (2.0 * h);
        worst = worst.max((fd - g.b[idx]).abs() / fd.abs().max(1e-3));
    }
    Ok(worst)
}

fn reconstruction_error() -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let domain = BoxDomain::unit(6);
    let emb = LinearEmbedding::new(normal_matrix(2, 6, &mut rng) * 0.3)?;
    let target = domain.sample_uniform(&mut rng);
    let zq = emb.project(&target)?;
    let mut prior = uniform_prior::<ChaCha8Rng>(&domain);
    let r = randomized_reconstruct(&emb, zq.as_slice(), &mut prior, &domain, 1e-12, 100, &mut rng)?;
    let resid = (emb.project(&r.x)? - zq).norm_squared();
    let init = r.init.unwrap_or_default();
    let w0 = DVector::from_vec(null_space_component(&emb, &init)?);
    let w1 = DVector::from_vec(null_space_component(&emb, &r.x)?);
    Ok(resid.max((w0 - w1).norm()))
}

fn dpp_single_item_tv() -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let diag = [4.0, 3.0, 2.0, 1.0];
    let cfg = DppConfig { gibbs_steps: Some(16), ..Default::default() };
    let mut counts = [0usize; 4];
    let runs = 4000;
    for _ in 0..runs {
        let s = sample_kdpp_gibbs(
            1,
            |s: &[usize]| Ok(DMatrix::from_element(1, 1, diag[s[0]])),
            |r: &mut ChaCha8Rng| Ok(rand::RngExt::random_range(r, 0..4usize)),
            &cfg,
            &mut rng,
        )?;
        counts[s.points[0]] += 1;
    }
    let total: f64 = diag.iter().sum();
    Ok(0.5 * (0..4).map(|i| (counts[i] as f64 / runs as f64 - diag[i] / total).abs()).sum::<f64>())
}

fn containment_excess() -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let p = make_embedded_problem(BaseFunction::Branin, 50, 0.0, &mut rng)?;
    let domain = BoxDomain::unit(50);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let z = p.project(&domain.sample_uniform(&mut rng));
        worst = worst.max(z.iter().fold(0.0_f64, |m, v| m.max(v.abs())) - 1.0);
    }
    Ok(worst)
}

fn tiny_trial_repeats() -> Result<bool> {
    let mut cfg = ExperimentConfig { dim: 6, budget: 2, n_init: 4, n_batch: 2, ..Default::default() };
    cfg.adam.iterations = 40;
    cfg.adam.restarts = 1;
    cfg.acquisition.est_candidates = 64;
    let a = run_trial(&cfg, 3)?;
    let b = run_trial(&cfg, 3)?;
    Ok(a.without_timing() == b.without_timing() && a.records.len() == 8)
}

fn check(name: &'static str, r: Result<f64>, tol: f64) -> CheckResult {
    match r {
        Ok(v) => CheckResult { name, passed: v <= tol, detail: format!("{v:.3e} (tolerance {tol:.0e})") },
        Err(e) => CheckResult { name, passed: false, detail: e.to_string() },
    }
}

pub fn run_selftest() -> Vec<CheckResult> {
    let trial = match tiny_trial_repeats() {
        Ok(ok) => CheckResult { name: "trial-determinism", passed: ok, detail: "rerun with same seed".into() },
        Err(e) => CheckResult { name: "trial-determinism", passed: false, detail: e.to_string() },
    };
    vec![
        check("posterior-vs-dense", posterior_matches_dense(), 1e-8),
        check("lml-gradient", lml_gradient_error(), 1e-4),
        check("reconstruction", reconstruction_error(), 1e-6),
        check("kdpp-single-item", dpp_single_item_tv(), 0.05),
        check("embedding-containment", containment_excess(), 1e-12),
        trial,
    ]
}
