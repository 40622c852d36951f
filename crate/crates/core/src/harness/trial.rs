use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{AcquisitionSettings, ExperimentConfig, Method};
use super::rng::{stream, Purpose};
use crate::acquisition::{est_beta, AcquisitionMode, AcquisitionSpec};
use crate::batch_dpp::select_batch;
use crate::benchmarks::{make_embedded_problem, sobol_init, ExternalObjective, Objective};
use crate::domain::{BoxDomain, Dataset};
use crate::error::{Error, Result};
use crate::flags::{Flag, Flags};
use crate::gp::{
    fit_ard_hyperparameters, fit_hyperparameters_with, fit_posterior, AdamConfig, EmbeddingStructure,
    GpPosterior, MahaKernelParams,
};
use crate::reconstruction::{low_dim_posterior, two_step_select_in, LinearEmbedding, ReconstructionStrategy};

pub const SCHEMA_VERSION: u32 = 1;

/// One evaluation. Round 0 is the initial design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub seed: u64,
    pub round: usize,
    pub batch_index: usize,
    pub x: Vec<f64>,
    pub y: f64,
    pub best_so_far: f64,
    /// Milliseconds since the trial started.
    pub wall_ms: u64,
    pub flags: Flags,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundError {
    pub round: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialLog {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub records: Vec<EvalRecord>,
    /// Rounds whose selection failed and fell back to random queries.
    pub errors: Vec<RoundError>,
}

impl TrialLog {
    pub fn final_best(&self) -> Option<f64> {
        self.records.last().map(|r| r.best_so_far)
    }

    /// Best value after each round, starting with round 0.
    pub fn best_by_round(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for r in &self.records {
            if r.round < out.len() {
                out[r.round] = r.best_so_far;
            } else {
                out.push(r.best_so_far);
            }
        }
        out
    }

    /// Copy with timing fields zeroed, for reproducibility checks.
    pub fn without_timing(&self) -> Self {
        let mut c = self.clone();
        c.records.iter_mut().for_each(|r| r.wall_ms = 0);
        c
    }
}

fn build_objective(cfg: &ExperimentConfig, seed: u64) -> Result<Box<dyn Objective>> {
    match (cfg.base_function()?, &cfg.external) {
        (Some(base), _) => {
            let mut rng = stream(seed, 0, Purpose::Problem);
            Ok(Box::new(make_embedded_problem(base, cfg.dim, cfg.noise_sd, &mut rng)?))
        }
        (None, Some(ext)) => Ok(Box::new(ExternalObjective::spawn(&ext.program, &ext.args, BoxDomain::unit(cfg.dim))?)),
        (None, None) => Err(Error::Config("external objective without a command".into())),
    }
}

/// Zero-mean, unit-variance copy of the observations.
fn standardize(data: &Dataset) -> Result<Dataset> {
    let y = data.values();
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
    data.with_values(y.iter().map(|v| (v - mean) / sd).collect())
}

fn resolve_spec<R: rand::Rng + ?Sized>(
    post: &GpPosterior,
    domain: &BoxDomain,
    settings: &AcquisitionSettings,
    rng: &mut R,
) -> Result<AcquisitionSpec> {
    let spec = match settings.mode {
        AcquisitionMode::FixedLcb => AcquisitionSpec::fixed(settings.beta)?,
        AcquisitionMode::Est => est_beta(post, domain, settings.est_candidates, rng)?,
    };
    Ok(spec.with_scale(settings.scale))
}

/// State carried between rounds.
struct Learner {
    warm: Option<MahaKernelParams>,
}

impl Learner {
    fn fit(&mut self, cfg: &ExperimentConfig, data: &Dataset, seed: u64, round: usize) -> Result<(MahaKernelParams, bool)> {
        let mut adam: AdamConfig = cfg.adam.clone();
        let warm = if cfg.refit.warm_start { self.warm.as_ref() } else { None };
        if warm.is_some() {
            adam.restarts = cfg.refit.fresh_restarts;
            if let Some(it) = cfg.refit.iterations {
                adam.iterations = it;
            }
        }
        let mut rng = stream(seed, round as u64, Purpose::Fit);
        let report = match cfg.method {
            Method::RbfArd => fit_ard_hyperparameters(data, &adam, warm, &mut rng)?,
            _ => fit_hyperparameters_with(
                data,
                cfg.effective_embed_dim()?,
                EmbeddingStructure::Full,
                &adam,
                warm,
                &mut rng,
            )?,
        };
        self.warm = Some(report.params.clone());
        Ok((report.params, report.perturbed))
    }
}

fn select_round(
    cfg: &ExperimentConfig,
    learner: &mut Learner,
    data: &Dataset,
    domain: &BoxDomain,
    seed: u64,
    round: usize,
) -> Result<(Vec<Vec<f64>>, Flags)> {
    let sdata = standardize(data)?;
    let (params, perturbed) = learner.fit(cfg, &sdata, seed, round)?;
    let mut rng = stream(seed, round as u64, Purpose::Acquisition);
    let (points, mut flags) = match cfg.method {
        Method::MahaOneStep | Method::RbfArd => {
            let post = fit_posterior(&sdata, &params)?;
            let spec = resolve_spec(&post, domain, &cfg.acquisition, &mut rng)?;
            let sel = select_batch(&post, domain, cfg.n_batch, &spec, &cfg.optimizer, &cfg.dpp, &mut rng)?;
            (sel.points, sel.flags)
        }
        Method::MahaPinv | Method::MahaRandom => {
            let strategy = if cfg.method == Method::MahaPinv {
                ReconstructionStrategy::Pinv
            } else {
                ReconstructionStrategy::Randomized
            };
            let emb = LinearEmbedding::new(params.embedding().clone())?;
            let (zpost, zbox) = low_dim_posterior(&sdata, &params, domain)?;
            let spec = resolve_spec(&zpost, &zbox, &cfg.acquisition, &mut rng)?;
            let sel = two_step_select_in(
                &zpost,
                &zbox,
                &emb,
                domain,
                cfg.n_batch,
                strategy,
                &spec,
                &cfg.optimizer,
                &cfg.dpp,
                &mut rng,
            )?;
            (sel.points, sel.flags)
        }
    };
    if perturbed {
        flags.insert(Flag::EmbeddingPerturbed);
    }
    if points.len() != cfg.n_batch || points.iter().any(|x| !domain.contains(x)) {
        return Err(Error::NumericalFailure("batch selection returned an invalid batch".into()));
    }
    Ok((points, flags))
}

/// Runs one seeded trial: Sobol design, then `budget` rounds of
/// fit, select, evaluate. Selection failures are logged and replaced by
/// uniform random queries; evaluation failures abort the trial.
pub fn run_trial(cfg: &ExperimentConfig, seed: u64) -> Result<TrialLog> {
    cfg.validate()?;
    let started = Instant::now();
    let mut objective = build_objective(cfg, seed)?;
    let domain = objective.domain().clone();
    let mut data = Dataset::new();
    let mut records = Vec::with_capacity(cfg.total_evaluations());
    let mut errors = Vec::new();
    let mut best = f64::INFINITY;

    let mut evaluate_batch = |round: usize,
                              points: Vec<Vec<f64>>,
                              flags: Flags,
                              data: &mut Dataset,
                              records: &mut Vec<EvalRecord>|
     -> Result<()> {
        let mut noise = stream(seed, round as u64, Purpose::Noise);
        for (b, x) in points.into_iter().enumerate() {
            let y = objective.evaluate(&x, &mut noise)?;
            if !y.is_finite() {
                return Err(Error::External(format!("objective returned {y}")));
            }
            data.push(&domain, x.clone(), y)?;
            best = best.min(y);
            records.push(EvalRecord {
                seed,
                round,
                batch_index: b,
                x,
                y,
                best_so_far: best,
                wall_ms: started.elapsed().as_millis() as u64,
                flags: flags.clone(),
            });
        }
        Ok(())
    };

    let init = sobol_init(&domain, cfg.n_init, seed)?;
    evaluate_batch(0, init, Flags::from([Flag::InitialDesign]), &mut data, &mut records)?;

    let mut learner = Learner { warm: None };
    for round in 1..=cfg.budget {
        let (points, flags) = match select_round(cfg, &mut learner, &data, &domain, seed, round) {
            Ok(v) => v,
            Err(e) => {
                errors.push(RoundError { round, message: e.to_string() });
                let mut rng = stream(seed, round as u64, Purpose::Fallback);
                let pts = (0..cfg.n_batch).map(|_| domain.sample_uniform(&mut rng)).collect();
                (pts, Flags::from([Flag::RandomFallback]))
            }
        };
        evaluate_batch(round, points, flags, &mut data, &mut records)?;
    }
    Ok(TrialLog { schema_version: SCHEMA_VERSION, config: cfg.clone(), seed, records, errors })
}

/// Runs every seed of `cfg`, in parallel across `cfg.threads` workers.
/// Results come back in seed order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<TrialLog>> {
    cfg.validate()?;
    let workers = match cfg.threads {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        n => n,
    }
    .min(cfg.seeds.len())
    .max(1);
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut slots: Vec<Option<Result<TrialLog>>> = (0..cfg.seeds.len()).map(|_| None).collect();
    let results = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= cfg.seeds.len() {
                    break;
                }
                let log = run_trial(cfg, cfg.seeds[i]);
                results.lock().expect("result lock")[i] = Some(log);
            });
        }
    });
    slots.into_iter().map(|r| r.expect("every seed ran")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardization_has_unit_scale() {
        let d = BoxDomain::unit(1);
        let ds = Dataset::from_parts(&d, vec![vec![0.0], vec![0.5], vec![1.0]], vec![1.0, 2.0, 6.0]).unwrap();
        let s = standardize(&ds).unwrap();
        let m: f64 = s.values().iter().sum::<f64>() / 3.0;
        let v: f64 = s.values().iter().map(|y| (y - m).powi(2)).sum::<f64>() / 3.0;
        assert!(m.abs() < 1e-12 && (v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn best_by_round_takes_last_record_of_each_round() {
        let rec = |round, best| EvalRecord {
            seed: 0,
            round,
            batch_index: 0,
            x: vec![],
            y: best,
            best_so_far: best,
            wall_ms: 0,
            flags: Flags::new(),
        };
        let log = TrialLog {
            schema_version: SCHEMA_VERSION,
            config: ExperimentConfig::default(),
            seed: 0,
            records: vec![rec(0, 5.0), rec(0, 4.0), rec(1, 3.0), rec(2, 3.0)],
            errors: vec![],
        };
        assert_eq!(log.best_by_round(), vec![4.0, 3.0, 3.0]);
    }
}
