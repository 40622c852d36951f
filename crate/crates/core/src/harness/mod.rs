//! Seeded experiment driver: runs trials, writes logs, summarizes them.

mod config;
mod logio;
pub mod rng;
mod selftest;
mod summary;
mod trial;

pub use config::{
    AcquisitionSettings, ExperimentConfig, ExternalCommand, Method, RefitConfig, DEFAULT_MAX_EVALUATIONS,
};
pub use logio::{
    best_by_round, read_trial_csv, read_trial_json, trial_csv_paths, trial_stem, write_trial, CsvRecord,
};
pub use summary::{format_mean_se, summarize, summarize_dir, summarize_series, Summary, SummaryRow};
pub use trial::{run_experiment, run_trial, EvalRecord, RoundError, TrialLog, SCHEMA_VERSION};
pub use selftest::{run_selftest, CheckResult};
