use mahabo::flags::Flag;
use mahabo::harness::{
    read_trial_csv, read_trial_json, run_experiment, run_trial, summarize, summarize_dir, write_trial,
    ExperimentConfig, ExternalCommand, Method, SCHEMA_VERSION,
};
use mahabo::BoxDomain;

fn small(method: Method) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        function: "branin".into(),
        dim: 6,
        method,
        n_init: 5,
        n_batch: 1,
        budget: 3,
        seeds: vec![0],
        ..Default::default()
    };
    cfg.adam.iterations = 50;
    cfg.adam.restarts = 1;
    cfg.acquisition.est_candidates = 100;
    cfg
}

#[test]
fn zero_budget_logs_only_the_initial_design() {
    let cfg = ExperimentConfig { budget: 0, ..small(Method::MahaOneStep) };
    let log = run_trial(&cfg, 0).unwrap();
    assert_eq!(log.records.len(), 5);
    assert!(log.records.iter().all(|r| r.round == 0 && r.flags.contains(&Flag::InitialDesign)));
}

#[test]
fn batch_rounds_contribute_exactly_n_batch_records() {
    let cfg = ExperimentConfig { n_batch: 5, n_init: 10, ..small(Method::MahaOneStep) };
    let log = run_trial(&cfg, 1).unwrap();
    assert_eq!(log.records.len(), 25);
    for round in 1..=3 {
        let idx: Vec<usize> = log.records.iter().filter(|r| r.round == round).map(|r| r.batch_index).collect();
        assert_eq!(idx, vec![0, 1, 2, 3, 4]);
    }
}

#[test]
fn every_method_produces_monotone_in_domain_logs() {
    let dom = BoxDomain::unit(6);
    for method in Method::ALL {
        let cfg = ExperimentConfig { n_batch: 2, ..small(method) };
        let log = run_trial(&cfg, 2).unwrap();
        assert_eq!(log.records.len(), 11, "{}", method.name());
        for w in log.records.windows(2) {
            assert!(w[1].best_so_far <= w[0].best_so_far);
        }
        assert!(log.records.iter().all(|r| dom.contains(&r.x)));
        let min = log.records.iter().map(|r| r.y).fold(f64::INFINITY, f64::min);
        assert_eq!(log.final_best(), Some(min));
    }
}

#[test]
fn reruns_are_identical_up_to_timing() {
    let cfg = ExperimentConfig { n_batch: 3, ..small(Method::MahaRandom) };
    let a = run_trial(&cfg, 4).unwrap();
    let b = run_trial(&cfg, 4).unwrap();
    assert_eq!(a.without_timing(), b.without_timing());
}

#[test]
fn parallel_runs_match_sequential_runs() {
    let cfg = ExperimentConfig { seeds: vec![0, 1, 2], threads: 2, ..small(Method::MahaPinv) };
    let par = run_experiment(&cfg).unwrap();
    for (log, seed) in par.iter().zip([0, 1, 2]) {
        assert_eq!(log.seed, seed);
        assert_eq!(log.without_timing(), run_trial(&cfg, seed).unwrap().without_timing());
    }
}

#[test]
fn methods_share_the_initial_design_and_problem() {
    let a = run_trial(&small(Method::MahaOneStep), 5).unwrap();
    let b = run_trial(&small(Method::RbfArd), 5).unwrap();
    for (ra, rb) in a.records.iter().zip(&b.records).take(5) {
        assert_eq!((&ra.x, ra.y), (&rb.x, rb.y));
    }
}

#[test]
fn logs_round_trip_through_disk() {
    let dir = tempfile_dir("roundtrip");
    let cfg = small(Method::MahaOneStep);
    let log = run_trial(&cfg, 6).unwrap();
    let (csv, json) = write_trial(&dir, &log).unwrap();
    let rows = read_trial_csv(&csv).unwrap();
    assert_eq!(rows.len(), log.records.len());
    assert_eq!(rows[0].flags, "initial-design");
    assert!(rows.iter().zip(&log.records).all(|(c, r)| c.y == r.y && c.best_so_far == r.best_so_far));
    let back = read_trial_json(&json).unwrap();
    assert_eq!(back, log);
    assert_eq!(back.schema_version, SCHEMA_VERSION);
    let s = summarize_dir(&dir).unwrap();
    assert_eq!(s, summarize(&[log]).unwrap());
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn failed_rounds_fall_back_to_random_queries() {
    let mut cfg = ExperimentConfig { n_batch: 3, budget: 4, ..small(Method::MahaOneStep) };
    // a single rejection pushes lambda past its ceiling
    cfg.dpp.rejection_budget = 1;
    cfg.dpp.lambda_growth = 1e7;
    let log = run_trial(&cfg, 7).unwrap();
    assert_eq!(log.records.len(), 5 + 12);
    assert!(!log.errors.is_empty());
    for e in &log.errors {
        let rows: Vec<_> = log.records.iter().filter(|r| r.round == e.round).collect();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.flags.contains(&Flag::RandomFallback)));
    }
}

#[cfg(unix)]
#[test]
fn external_objectives_drive_a_trial() {
    let script = r#"while read l; do echo "$l" | awk '{ s = 0; for (i = 1; i <= NF; i++) s += $i * $i; print s }'; done"#;
    let mut cfg = small(Method::MahaOneStep);
    cfg.function = "external".into();
    cfg.dim = 3;
    cfg.embed_dim = Some(1);
    cfg.external = Some(ExternalCommand { program: "sh".into(), args: vec!["-c".into(), script.into()] });
    let log = run_trial(&cfg, 0).unwrap();
    assert_eq!(log.records.len(), 8);
    for r in &log.records {
        let want: f64 = r.x.iter().map(|v| v * v).sum();
        assert!((r.y - want).abs() < 1e-4 * want.max(1.0));
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let cfg = ExperimentConfig { function: "nope".into(), ..small(Method::MahaOneStep) };
    assert!(run_trial(&cfg, 0).is_err());
    let cfg = ExperimentConfig { embed_dim: Some(3), ..small(Method::RbfArd) };
    assert!(cfg.validate().is_err());
    let cfg = ExperimentConfig { function: "external".into(), ..small(Method::MahaOneStep) };
    assert!(cfg.validate().is_err());
}

fn tempfile_dir(tag: &str) -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("mahabo-test-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}
