//! `mahabo`: run seeded optimization experiments and summarize their logs.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mahabo::harness::{
    run_experiment, run_selftest, summarize_dir, write_trial, ExperimentConfig, Method,
};
use mahabo::Error;

const OUT_DIR_ENV: &str = "MAHABO_OUT_DIR";
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "mahabo", version, about = "Batch Bayesian optimization in high dimensions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write a log per seed.
    Run(RunArgs),
    /// Aggregate trial logs into per-round mean and standard error.
    Summarize(SummarizeArgs),
    /// Run a short set of numerical smoke checks.
    Selftest,
}

#[derive(clap::Args)]
struct RunArgs {
    /// JSON experiment config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// branin, colville, goldstein-price, hartmann6 or six-hump-camel.
    #[arg(long)]
    function: Option<String>,
    /// Input dimension D.
    #[arg(long)]
    dim: Option<usize>,
    /// Embedding dimension d fitted by the model.
    #[arg(long)]
    embed_dim: Option<usize>,
    /// maha-one-step, maha-pinv, maha-random or rbf-ard.
    #[arg(long, value_parser = parse_method)]
    method: Option<Method>,
    /// Queries per round.
    #[arg(long)]
    batch: Option<usize>,
    /// Rounds after the initial design.
    #[arg(long)]
    budget: Option<usize>,
    /// Size of the Sobol initial design.
    #[arg(long)]
    n_init: Option<usize>,
    /// Inclusive range `a..b` or comma list.
    #[arg(long, value_parser = parse_seed_list)]
    seeds: Option<SeedList>,
    /// Standard deviation of Gaussian observation noise.
    #[arg(long)]
    noise_sd: Option<f64>,
    /// Worker threads across seeds; 0 uses all cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory [default: $MAHABO_OUT_DIR, else ./runs].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    Table,
}

#[derive(clap::Args)]
struct SummarizeArgs {
    dir: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::from_name(s).ok_or_else(|| {
        let names: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
        format!("unknown method `{s}` (expected one of {})", names.join(", "))
    })
}

/// Parsed `--seeds` value.
#[derive(Clone, Debug)]
struct SeedList(Vec<u64>);

fn parse_seed_list(s: &str) -> Result<SeedList, String> {
    parse_seeds(s).map(SeedList)
}

fn parse_seeds(s: &str) -> Result<Vec<u64>, String> {
    let bad = |_| format!("invalid seed list `{s}`");
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(bad)?, b.trim().parse().map_err(bad)?);
        if a > b {
            return Err(format!("empty seed range `{s}`"));
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|p| p.trim().parse().map_err(bad)).collect()
}

fn build_config(args: &RunArgs) -> Result<ExperimentConfig, String> {
    let mut cfg = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| format!("cannot read {}: {e}", p.display()))?;
            serde_json::from_str(&text).map_err(|e| format!("invalid config {}: {e}", p.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(v) = &args.function {
        cfg.function = v.clone();
    }
    if let Some(v) = args.dim {
        cfg.dim = v;
    }
    if args.embed_dim.is_some() {
        cfg.embed_dim = args.embed_dim;
    }
    if let Some(v) = args.method {
        cfg.method = v;
    }
    if let Some(v) = args.batch {
        cfg.n_batch = v;
    }
    if let Some(v) = args.budget {
        cfg.budget = v;
    }
    if let Some(v) = args.n_init {
        cfg.n_init = v;
    }
    if let Some(v) = &args.seeds {
        cfg.seeds = v.0.clone();
    }
    if let Some(v) = args.noise_sd {
        cfg.noise_sd = v;
    }
    if let Some(v) = args.threads {
        cfg.threads = v;
    }
    if let Some(d) = cfg.embed_dim {
        if cfg.dim < d {
            return Err(format!("--dim ({}) must be at least --embed-dim ({d})", cfg.dim));
        }
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn out_dir(args: &RunArgs) -> PathBuf {
    args.out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn run(args: RunArgs) -> ExitCode {
    let cfg = match build_config(&args) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let dir = out_dir(&args);
    let logs = match run_experiment(&cfg) {
        Ok(l) => l,
        Err(e) => return runtime_failure(&e),
    };
    for log in &logs {
        if let Err(e) = write_trial(&dir, log) {
            return runtime_failure(&e);
        }
        let failed = log.errors.len();
        println!(
            "seed {}: final best {:.6}{}",
            log.seed,
            log.final_best().unwrap_or(f64::NAN),
            if failed > 0 { format!(" ({failed} rounds fell back to random queries)") } else { String::new() }
        );
    }
    println!("wrote {} trial logs to {}", logs.len(), dir.display());
    ExitCode::SUCCESS
}

fn summarize(args: SummarizeArgs) -> ExitCode {
    let summary = match summarize_dir(&args.dir) {
        Ok(s) => s,
        Err(e @ Error::Io(_)) => return runtime_failure(&e),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let written = write_summary(&args.dir, &summary);
    if let Err(e) = written {
        return runtime_failure(&e);
    }
    match args.format {
        Format::Csv => match summary.to_csv() {
            Ok(s) => print!("{s}"),
            Err(e) => return runtime_failure(&e),
        },
        Format::Json => println!("{}", summary.plot_data()),
        Format::Table => {
            println!("trials: {}", summary.n_trials);
            for r in &summary.rows {
                println!("{:>5}  {}", r.round, mahabo::harness::format_mean_se(r.mean_best, r.se_best));
            }
        }
    }
    ExitCode::SUCCESS
}

fn write_summary(dir: &Path, summary: &mahabo::harness::Summary) -> mahabo::Result<()> {
    std::fs::write(dir.join("summary.csv"), summary.to_csv()?)?;
    std::fs::write(dir.join("plot-data.json"), serde_json::to_string_pretty(&summary.plot_data())?)?;
    Ok(())
}

fn selftest() -> ExitCode {
    let results = run_selftest();
    let mut ok = true;
    for r in &results {
        println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
        ok &= r.passed;
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_RUNTIME)
    }
}

fn runtime_failure(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(EXIT_RUNTIME)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(a) => run(a),
        Command::Summarize(a) => summarize(a),
        Command::Selftest => selftest(),
    }
}
