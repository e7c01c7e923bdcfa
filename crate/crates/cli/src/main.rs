//! `hierbench`: rank-stability experiments for hierarchical forecast
//! benchmarks.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hierbench::config::{Experiment, OutputFormat, RunConfig};
use hierbench::error::RunError;
use hierbench::run::{headline, run_experiments, write_outputs};
use hierbench::validate::validate_config;

#[derive(Parser)]
#[command(name = "hierbench", version, about = "Rank stability of forecast error measures on hierarchical data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the dataset, forecasts and reference ranking named in a config.
    Validate {
        #[arg(long)]
        config: PathBuf,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Run experiments and write CSV/JSON reports.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// stability, per-level, total, temporal, magic, sweep, matrix or all.
        #[arg(long)]
        experiment: Option<Experiment>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        splits: Option<usize>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// csv, json or both.
        #[arg(long)]
        format: Option<OutputFormat>,
        /// Worker threads (defaults to all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Write the synthetic demo fixture, forecasts and config to a directory.
    SeedDemo { dir: PathBuf },
}

fn load(path: &PathBuf) -> Result<RunConfig, RunError> {
    Ok(RunConfig::load(path)?)
}

fn validate(config: &PathBuf, json: bool) -> Result<(), RunError> {
    let cfg = load(config)?;
    let (report, _) = validate_config(&cfg);
    if json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        print!("{}", report.render());
    }
    if report.is_ok() {
        Ok(())
    } else {
        Err(RunError::Validation(report.fatal_count()))
    }
}

#[allow(clippy::too_many_arguments)]
fn run(
    config: &PathBuf,
    experiment: Option<Experiment>,
    seed: Option<u64>,
    splits: Option<usize>,
    out: Option<PathBuf>,
    format: Option<OutputFormat>,
    threads: Option<usize>,
) -> Result<(), RunError> {
    let mut cfg = load(config)?;
    if let Some(e) = experiment {
        cfg.run.experiment = e;
    }
    if let Some(s) = seed {
        cfg.run.seed = s;
    }
    if let Some(n) = splits {
        cfg.run.splits = n;
    }
    if let Some(f) = format {
        cfg.run.format = f;
    }
    if threads.is_some() {
        cfg.run.threads = threads;
    }
    cfg.check()?;
    let out_dir = match out {
        Some(dir) => dir,
        None => cfg.resolve(&cfg.run.out_dir),
    };

    let (validation, inputs) = validate_config(&cfg);
    for f in &validation.findings {
        if f.is_fatal() {
            log::error!("{}", f.message);
        } else {
            log::warn!("{}", f.message);
        }
    }
    let inputs = match inputs {
        Some(i) if validation.is_ok() => i,
        _ => return Err(RunError::Validation(validation.fatal_count().max(1))),
    };
    let report = run_experiments(&cfg, &inputs)?;
    let written = write_outputs(&report, &out_dir, cfg.run.format)?;
    print!("{}", headline(&report));
    for p in written {
        log::info!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { config, json } => validate(&config, json),
        Command::Run {
            config,
            experiment,
            seed,
            splits,
            out,
            format,
            threads,
        } => run(&config, experiment, seed, splits, out, format, threads),
        Command::SeedDemo { dir } => hierbench::demo::seed_demo(&dir)
            .map(|files| println!("wrote demo fixture; run with --config {}", files.config.display()))
            .map_err(RunError::from),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
