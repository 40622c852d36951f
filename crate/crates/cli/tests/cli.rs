use std::path::Path;
use std::process::{Command, Output};

fn mahabo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mahabo")).args(args).output().unwrap()
}

fn run_small(out: &Path, seeds: &str) -> Output {
    mahabo(&[
        "run", "--function", "branin", "--dim", "6", "--embed-dim", "2", "--method", "maha-one-step",
        "--n-init", "4", "--budget", "2", "--seeds", seeds, "--out", out.to_str().unwrap(),
    ])
}

#[test]
fn run_writes_one_csv_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_small(dir.path(), "0..4");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csvs = std::fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "csv"))
        .count();
    assert_eq!(csvs, 5);
}

#[test]
fn summarize_emits_round_mean_se() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_small(dir.path(), "0,1").status.success());
    let out = mahabo(&["summarize", dir.path().to_str().unwrap(), "--format", "csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("round,mean_best,se_best"));
    assert_eq!(text.lines().count(), 1 + 3);
    assert!(dir.path().join("summary.csv").exists());
    assert!(dir.path().join("plot-data.json").exists());
}

#[test]
fn dim_below_embed_dim_is_a_config_error() {
    let out = mahabo(&["run", "--dim", "1", "--embed-dim", "2", "--out", "/nonexistent"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--dim") && err.contains("--embed-dim"), "{err}");
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = mahabo(&["run", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn selftest_passes() {
    let out = mahabo(&["selftest"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
}
