use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use qrbf_harness::config::{DataSource, ExperimentConfig, Pipeline, QuerySource};
use qrbf_harness::data::{gen_data, Target};
use qrbf_harness::pipeline::{load_dataset, query_points, run_pipeline, write_report};
use qrbf_harness::report::{write_json, write_rows_file};
use qrbf_harness::sweep::sweep;
use qrbf_harness::verify::{all_pass, verify_bounds, Suite};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "qrbf", version, about = "Radial basis function interpolation: classical and simulated quantum pipelines")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed; overrides the configuration file and QRBF_SEED.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Dotted override such as `kernel.sigma=0.3`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset as CSV.
    GenData {
        #[arg(long, default_value_t = 100)]
        m: usize,
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 0.0)]
        lo: f64,
        #[arg(long, default_value_t = 1.0)]
        hi: f64,
        #[arg(long, value_parser = parse_target, default_value = "franke")]
        target: Target,
        /// Destination file; defaults to `<out>/data.csv`.
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Run a pipeline on the configured data and random query points.
    Fit {
        #[arg(long, value_parser = parse_pipeline)]
        pipeline: Option<Pipeline>,
        /// Dataset CSV (`x1,...,xd,y`) replacing the configured source.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Run a pipeline and evaluate at the points of a query file.
    Evaluate {
        #[arg(long)]
        query_file: PathBuf,
        #[arg(long, value_parser = parse_pipeline)]
        pipeline: Option<Pipeline>,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Run a bound suite; exits nonzero when any row fails.
    VerifyBounds {
        /// truncation, gram, dme, inversion, perturbation, compact-oracle or all.
        #[arg(long)]
        suite: String,
    },
    /// Run the configured pipeline once per parameter value.
    Sweep {
        /// Dotted configuration path, e.g. `kernel.sigma`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn parse_target(s: &str) -> std::result::Result<Target, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| format!("unknown target {s:?}"))
}

fn parse_pipeline(s: &str) -> std::result::Result<Pipeline, String> {
    s.parse::<Pipeline>().map_err(|e| e.to_string())
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::load_or_default(common.config.as_deref())
        .with_context(|| format!("loading configuration {:?}", common.config))?;
    for o in &common.overrides {
        let Some((key, value)) = o.split_once('=') else {
            bail!("override {o:?} is not KEY=VALUE");
        };
        config.set(key, value)?;
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(out) = &common.out {
        config.output = out.clone();
    }
    Ok(config)
}

fn fit(config: &ExperimentConfig) -> Result<()> {
    let dataset = load_dataset(config).context("loading data")?;
    let queries = query_points(config, &dataset).context("loading queries")?;
    let report = run_pipeline(config, &dataset, &queries)?;
    write_report(&report, &config.output)?;
    println!("pipeline {} on {} sites in {} dimensions", report.pipeline.name(), report.m, report.d);
    println!("cost: {}", report.complexity);
    println!("classical residual {:.3e}, kappa {:.3e}", report.classical.residual, report.classical.kappa);
    if let Some(q) = &report.quantum {
        println!("fidelity {:.12}, state error {:.3e}, matrix error {:.3e}", q.fidelity, q.state_error, q.matrix_error);
    }
    if let Some(e) = report.max_abs_error {
        println!("max |f_quantum - f_classical| {e:.3e}");
    }
    println!("wrote {}", config.output.display());
    Ok(())
}

#[derive(Serialize)]
struct SuiteSummary<'a> {
    suite: &'a str,
    seed: u64,
    config_hash: &'a str,
    rows: usize,
    failures: Vec<String>,
}

fn verify(config: &ExperimentConfig, suite: &str) -> Result<bool> {
    let suites: Vec<Suite> = if suite == "all" { Suite::ALL.to_vec() } else { vec![suite.parse()?] };
    std::fs::create_dir_all(&config.output)?;
    let hash = config.hash();
    let mut ok = true;
    for s in suites {
        let rows = verify_bounds(s, config.seed, &hash)?;
        let csv = config.output.join(format!("verify-{}.csv", s.name()));
        write_rows_file(&csv, &rows)?;
        let failures: Vec<String> = rows.iter().filter(|r| !r.pass).map(|r| r.case.clone()).collect();
        let summary = SuiteSummary { suite: s.name(), seed: config.seed, config_hash: &hash, rows: rows.len(), failures };
        write_json(config.output.join(format!("verify-{}.json", s.name())), &summary)?;
        let status = if all_pass(&rows) { "PASS" } else { "FAIL" };
        println!("{status} {}: {} rows, {} failed -> {}", s.name(), rows.len(), summary.failures.len(), csv.display());
        for case in &summary.failures {
            println!("  failed: {case}");
        }
        ok &= all_pass(&rows);
    }
    Ok(ok)
}

fn with_data(mut config: ExperimentConfig, data: Option<&Path>, pipeline: Option<Pipeline>) -> ExperimentConfig {
    if let Some(path) = data {
        config.data = DataSource::File { path: path.to_path_buf() };
    }
    if let Some(p) = pipeline {
        config.pipeline = p;
    }
    config
}

fn run(cli: Cli) -> Result<bool> {
    let config = load_config(&cli.common)?;
    match cli.command {
        Command::GenData { m, d, lo, hi, target, file } => {
            let ds = gen_data(m, d, lo, hi, config.seed, target)?;
            let path = match file {
                Some(f) => f,
                None => {
                    std::fs::create_dir_all(&config.output)?;
                    config.output.join("data.csv")
                }
            };
            ds.write_csv(&path)?;
            println!("wrote {} sites to {}", ds.len(), path.display());
        }
        Command::Fit { pipeline, data } => fit(&with_data(config, data.as_deref(), pipeline))?,
        Command::Evaluate { query_file, pipeline, data } => {
            let mut config = with_data(config, data.as_deref(), pipeline);
            config.queries = QuerySource::File { path: query_file };
            fit(&config)?;
        }
        Command::VerifyBounds { suite } => return verify(&config, &suite),
        Command::Sweep { param, values, threads } => {
            let threads = threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let rows = sweep(&config, &param, &values, threads)?;
            std::fs::create_dir_all(&config.output)?;
            let path = config.output.join("sweep.csv");
            write_rows_file(&path, &rows)?;
            println!("wrote {} cells to {}", rows.len(), path.display());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
