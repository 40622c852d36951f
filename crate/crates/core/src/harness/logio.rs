//! On-disk trial logs: a CSV per trial (no `x`, for tables) plus a JSON
//! sidecar with the config and full records (for replay).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::trial::TrialLog;
use crate::error::{Error, Result};
use crate::flags;

pub const TRIAL_PREFIX: &str = "trial-seed";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvRecord {
    pub seed: u64,
    pub round: usize,
    pub batch_index: usize,
    pub y: f64,
    pub best_so_far: f64,
    pub wall_ms: u64,
    /// Pipe-separated flag names.
    pub flags: String,
}

pub fn trial_stem(seed: u64) -> String {
    format!("{TRIAL_PREFIX}{seed}")
}

/// Writes `trial-seed<seed>.csv` and `.json` into `dir`, creating it.
pub fn write_trial(dir: &Path, log: &TrialLog) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let stem = trial_stem(log.seed);
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}.json"));
    let mut w = csv::Writer::from_path(&csv_path).map_err(csv_err)?;
    for r in &log.records {
        w.serialize(CsvRecord {
            seed: r.seed,
            round: r.round,
            batch_index: r.batch_index,
            y: r.y,
            best_so_far: r.best_so_far,
            wall_ms: r.wall_ms,
            flags: flags::join(&r.flags),
        })
        .map_err(csv_err)?;
    }
    w.flush()?;
    fs::write(&json_path, serde_json::to_string_pretty(log)?)?;
    Ok((csv_path, json_path))
}

pub fn read_trial_csv(path: &Path) -> Result<Vec<CsvRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

pub fn read_trial_json(path: &Path) -> Result<TrialLog> {
    let log: TrialLog = serde_json::from_str(&fs::read_to_string(path)?)?;
    if log.schema_version != super::trial::SCHEMA_VERSION {
        return Err(Error::Config(format!("unsupported log schema_version {}", log.schema_version)));
    }
    Ok(log)
}

/// Trial CSVs in `dir`, sorted by name.
pub fn trial_csv_paths(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|e| e == "csv")
                && p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with(TRIAL_PREFIX))
        })
        .collect();
    out.sort();
    Ok(out)
}

/// Best value after each round from CSV rows.
pub fn best_by_round(rows: &[CsvRecord]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for r in rows {
        if r.round < out.len() {
            out[r.round] = r.best_so_far;
        } else {
            out.resize(r.round + 1, r.best_so_far);
        }
    }
    out
}

fn csv_err(e: csv::Error) -> Error {
    Error::External(format!("csv: {e}"))
}
