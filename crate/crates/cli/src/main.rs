//! `ltlab` — experiment runner for the local-time toolkit.
//!
//! `ltlab run --config FILE` executes one experiment described by a TOML or
//! JSON config and writes CSV/JSON reports plus an append-only run record.
//! `ltlab list-runs --dir DIR` prints the recorded runs in order.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 experiment failure
//! (a checked invariant did not hold), 3 internal error.

mod config;
mod experiments;
mod record;
mod report;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use chrono::{SecondsFormat, Utc};
use clap::{Args, Parser, Subcommand};

use config::ExperimentConfig;
use record::RunRecord;

/// Errors ranked by exit code.
#[derive(Debug)]
pub enum CliError {
    /// bad invocation or bad config file — exit 1
    Config(String),
    /// the experiment ran and an invariant failed — exit 2
    Experiment(String),
    /// IO or numeric machinery broke — exit 3
    Internal(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Experiment(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Experiment(m) => write!(f, "experiment failure: {m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "ltlab",
    version,
    about = "Simulation and verification experiments for local times of rough processes"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment from a config file
    Run(RunArgs),
    /// List recorded runs in an output directory, oldest first
    ListRuns {
        /// directory holding run-*.json records
        #[arg(long)]
        dir: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// experiment description (TOML, or JSON for *.json)
    #[arg(long)]
    config: PathBuf,
    /// overrides master_seed from the config
    #[arg(long)]
    seed: Option<u64>,
    /// output directory (overrides the config; default ./runs)
    #[arg(long)]
    out: Option<PathBuf>,
    /// worker threads; affects wall time only, never any output byte
    #[arg(long)]
    threads: Option<usize>,
    /// echo progress to stderr
    #[arg(long, short)]
    verbose: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap help/version requests are success, not usage errors
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.cmd {
        Cmd::Run(args) => cmd_run(args),
        Cmd::ListRuns { dir } => cmd_list_runs(&dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let raw = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let mut config = ExperimentConfig::load(&args.config, &raw)?;
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    config.validate()?;

    if let Some(threads) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Internal(format!("thread pool: {e}")))?;
    }

    let out_dir = args
        .out
        .or_else(|| config.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"));
    let hash = record::config_hash(&config)?;
    if args.verbose {
        eprintln!(
            "running {} (seed {}, config {}) -> {}",
            config.experiment,
            config.master_seed,
            &hash[..12],
            out_dir.display()
        );
    }

    let started = now_utc();
    let run = experiments::run(&config, &out_dir, &hash, args.verbose);
    let finished = now_utc();

    let (outcome, outputs) = run?;
    let rec = RunRecord {
        artifact_version: record::ARTIFACT_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        experiment: config.experiment.name().to_string(),
        config_hash: hash.clone(),
        master_seed: config.master_seed,
        started_utc: started,
        finished_utc: finished,
        outputs: outputs.clone(),
        pass: outcome.pass,
        summary: outcome.summary.clone(),
    };
    record::append_record(&out_dir, &rec)?;

    println!(
        "{} [{}] {} — {}",
        config.experiment,
        rec.pass_label(),
        &hash[..12],
        outcome.summary
    );
    for f in &outputs {
        println!("  wrote {}", out_dir.join(f).display());
    }
    if outcome.pass == Some(false) {
        return Err(CliError::Experiment(outcome.summary));
    }
    Ok(())
}

fn cmd_list_runs(dir: &std::path::Path) -> Result<(), CliError> {
    let (records, corrupted) = record::list_runs(dir)?;
    for rec in &records {
        println!(
            "{}  {:>15}  [{}]  seed {}  {}  {}",
            rec.started_utc,
            rec.experiment,
            rec.pass_label(),
            rec.master_seed,
            &rec.config_hash[..12.min(rec.config_hash.len())],
            rec.summary
        );
    }
    for path in &corrupted {
        eprintln!("warning: corrupted run record: {path}");
    }
    Ok(())
}

fn now_utc() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}
