use serde::{Deserialize, Serialize};

use crate::acquisition::{AcquisitionMode, OptimizerConfig, UncertaintyScale};
use crate::batch_dpp::DppConfig;
use crate::benchmarks::BaseFunction;
use crate::error::{Error, Result};
use crate::gp::AdamConfig;

pub const DEFAULT_MAX_EVALUATIONS: usize = 5000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Mahalanobis GP, queries chosen directly in the box.
    MahaOneStep,
    /// Mahalanobis GP, optimize in `z`, reconstruct with the pseudo-inverse.
    MahaPinv,
    /// Mahalanobis GP, optimize in `z`, randomized reconstruction.
    MahaRandom,
    /// Axis-aligned ARD kernel, queries chosen directly in the box.
    RbfArd,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::MahaOneStep, Method::MahaPinv, Method::MahaRandom, Method::RbfArd];

    pub fn name(self) -> &'static str {
        match self {
            Method::MahaOneStep => "maha-one-step",
            Method::MahaPinv => "maha-pinv",
            Method::MahaRandom => "maha-random",
            Method::RbfArd => "rbf-ard",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcquisitionSettings {
    pub mode: AcquisitionMode,
    /// Used in fixed mode.
    pub beta: f64,
    pub scale: UncertaintyScale,
    pub est_candidates: usize,
}

impl Default for AcquisitionSettings {
    fn default() -> Self {
        Self {
            mode: AcquisitionMode::Est,
            beta: 2.0,
            scale: UncertaintyScale::StdDev,
            est_candidates: crate::acquisition::EST_CANDIDATES,
        }
    }
}

/// Per-round refitting after the first round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefitConfig {
    /// Start one restart from the previous round's parameters.
    pub warm_start: bool,
    /// Random restarts on top of the warm start.
    pub fresh_restarts: usize,
    /// Adam iterations per restart; `None` keeps the first-round value.
    pub iterations: Option<usize>,
}

impl Default for RefitConfig {
    fn default() -> Self {
        Self { warm_start: true, fresh_restarts: 1, iterations: None }
    }
}

/// Subprocess objective (see [`crate::benchmarks::external`]).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExternalCommand {
    pub program: String,
    #[serde(default)]
    pub args: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Benchmark name, or `external` together with `external`.
    pub function: String,
    pub dim: usize,
    /// Embedding dimension; defaults to the benchmark's true dimension and
    /// is forced to `dim` for `rbf-ard`.
    pub embed_dim: Option<usize>,
    pub method: Method,
    pub n_init: usize,
    pub n_batch: usize,
    /// Number of batch rounds after the initial design.
    pub budget: usize,
    pub seeds: Vec<u64>,
    pub noise_sd: f64,
    pub acquisition: AcquisitionSettings,
    pub optimizer: OptimizerConfig,
    pub dpp: DppConfig,
    pub adam: AdamConfig,
    pub refit: RefitConfig,
    pub max_evaluations: usize,
    pub external: Option<ExternalCommand>,
    /// Worker threads for independent trials; 0 uses all cores.
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            function: "branin".into(),
            dim: 100,
            embed_dim: None,
            method: Method::MahaOneStep,
            n_init: 10,
            n_batch: 1,
            budget: 20,
            seeds: vec![0],
            noise_sd: 0.0,
            acquisition: AcquisitionSettings::default(),
            optimizer: OptimizerConfig::default(),
            dpp: DppConfig::default(),
            adam: AdamConfig::default(),
            refit: RefitConfig::default(),
            max_evaluations: DEFAULT_MAX_EVALUATIONS,
            external: None,
            threads: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn is_external(&self) -> bool {
        self.function == "external"
    }

    pub fn base_function(&self) -> Result<Option<BaseFunction>> {
        if self.is_external() {
            return Ok(None);
        }
        BaseFunction::from_name(&self.function).map(Some)
    }

    /// Embedding dimension the method will fit.
    pub fn effective_embed_dim(&self) -> Result<usize> {
        if self.method == Method::RbfArd {
            return Ok(self.dim);
        }
        match (self.embed_dim, self.base_function()?) {
            (Some(d), _) => Ok(d),
            (None, Some(f)) => Ok(f.d_true()),
            (None, None) => Err(Error::Config("external objectives need embed_dim".into())),
        }
    }

    pub fn total_evaluations(&self) -> usize {
        self.n_init.saturating_add(self.budget.saturating_mul(self.n_batch))
    }

    pub fn validate(&self) -> Result<()> {
        let base = self.base_function()?;
        if self.dim == 0 {
            return Err(Error::Config("dim must be positive".into()));
        }
        if let Some(f) = base {
            if self.dim < f.d_true() {
                return Err(Error::Config(format!(
                    "dim = {} is below the true dimension {} of {}",
                    self.dim,
                    f.d_true(),
                    f.name()
                )));
            }
        }
        if self.is_external() != self.external.is_some() {
            return Err(Error::Config("function `external` and an external command go together".into()));
        }
        if let Some(d) = self.embed_dim {
            if d == 0 {
                return Err(Error::Config("embed_dim must be positive".into()));
            }
            if d > self.dim {
                return Err(Error::Config(format!("embed_dim = {d} exceeds dim = {}", self.dim)));
            }
            if self.method == Method::RbfArd && d != self.dim {
                return Err(Error::Config("rbf-ard uses embed_dim = dim".into()));
            }
        }
        self.effective_embed_dim()?;
        if self.n_init < 2 {
            return Err(Error::Config("n_init must be at least 2".into()));
        }
        if self.n_batch == 0 {
            return Err(Error::Config("n_batch must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.total_evaluations() > self.max_evaluations {
            return Err(Error::Config(format!(
                "n_init + budget * n_batch = {} exceeds the cap of {}",
                self.total_evaluations(),
                self.max_evaluations
            )));
        }
        if !(self.noise_sd >= 0.0) {
            return Err(Error::Config("noise_sd must be nonnegative".into()));
        }
        if !(self.acquisition.beta >= 0.0) {
            return Err(Error::Config("beta must be nonnegative".into()));
        }
        self.optimizer.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.n_batch > 1 {
            self.dpp.validate(self.n_batch - 1).map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.adam.restarts == 0 && !self.refit.warm_start {
            return Err(Error::Config("hyperparameter fitting needs at least one restart".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_oversized_runs() {
        let cfg = ExperimentConfig { budget: 1000, n_batch: 5, ..Default::default() };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn embed_dim_above_dim_is_rejected() {
        let cfg = ExperimentConfig { dim: 2, embed_dim: Some(3), ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn partial_json_fills_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"method": "maha-pinv", "n_batch": 5}"#).unwrap();
        assert_eq!(cfg.method, Method::MahaPinv);
        assert_eq!(cfg.n_init, 10);
    }
}
