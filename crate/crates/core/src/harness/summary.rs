use std::path::Path;

use serde::{Deserialize, Serialize};

use super::logio::{best_by_round, read_trial_csv, trial_csv_paths};
use super::trial::TrialLog;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub round: usize,
    pub mean_best: f64,
    /// Sample standard deviation over trials divided by `sqrt(n)`.
    pub se_best: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n_trials: usize,
    pub rows: Vec<SummaryRow>,
}

impl Summary {
    /// Final round as `mean ± se` with two decimals.
    pub fn final_row(&self) -> Option<String> {
        self.rows.last().map(|r| format_mean_se(r.mean_best, r.se_best))
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).map_err(|e| Error::External(format!("csv: {e}")))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::External(format!("csv: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::External(e.to_string()))
    }

    /// Series for a mean curve with a one-standard-error band.
    pub fn plot_data(&self) -> serde_json::Value {
        serde_json::json!({
            "schema_version": super::trial::SCHEMA_VERSION,
            "n_trials": self.n_trials,
            "round": self.rows.iter().map(|r| r.round).collect::<Vec<_>>(),
            "mean": self.rows.iter().map(|r| r.mean_best).collect::<Vec<_>>(),
            "lower": self.rows.iter().map(|r| r.mean_best - r.se_best).collect::<Vec<_>>(),
            "upper": self.rows.iter().map(|r| r.mean_best + r.se_best).collect::<Vec<_>>(),
        })
    }
}

pub fn format_mean_se(mean: f64, se: f64) -> String {
    format!("{mean:.2} ± {se:.2}")
}

/// Per-round mean and standard error over trials. Only rounds reached by
/// every trial are reported.
pub fn summarize_series(series: &[Vec<f64>]) -> Result<Summary> {
    if series.is_empty() {
        return Err(Error::InvalidArgument("summary needs at least one trial".into()));
    }
    let n = series.len();
    let rounds = series.iter().map(Vec::len).min().unwrap_or(0);
    let rows = (0..rounds)
        .map(|t| {
            let vals: Vec<f64> = series.iter().map(|s| s[t]).collect();
            let mean = vals.iter().sum::<f64>() / n as f64;
            let se = if n > 1 {
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                (var / n as f64).sqrt()
            } else {
                0.0
            };
            SummaryRow { round: t, mean_best: mean, se_best: se }
        })
        .collect();
    Ok(Summary { n_trials: n, rows })
}

pub fn summarize(logs: &[TrialLog]) -> Result<Summary> {
    summarize_series(&logs.iter().map(TrialLog::best_by_round).collect::<Vec<_>>())
}

/// Summarizes every trial CSV in `dir`.
pub fn summarize_dir(dir: &Path) -> Result<Summary> {
    let paths = trial_csv_paths(dir)?;
    if paths.is_empty() {
        return Err(Error::InvalidArgument(format!("no trial logs in {}", dir.display())));
    }
    let series = paths
        .iter()
        .map(|p| read_trial_csv(p).map(|rows| best_by_round(&rows)))
        .collect::<Result<Vec<_>>>()?;
    summarize_series(&series)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_trials() {
        let s = summarize_series(&[vec![1.0], vec![3.0]]).unwrap();
        assert_eq!(s.rows[0].mean_best, 2.0);
        assert!((s.rows[0].se_best - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_trial_has_zero_se() {
        let s = summarize_series(&[vec![3.0, 2.0, 1.0]]).unwrap();
        assert!(s.rows.iter().all(|r| r.se_best == 0.0));
    }

    #[test]
    fn table_format() {
        assert_eq!(format_mean_se(9.546, 0.3), "9.55 ± 0.30");
    }
}
