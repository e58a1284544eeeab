//! `ftmr`: run benchmarks on the simulated cluster, sweep failure positions,
//! and measure backup overhead.
//!
//! Exit codes: 0 success, 1 other runtime error, 2 configuration error,
//! 3 unrecoverable failure, 4 invariant violation or counterexample.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ftmr_core::harness::{measure_overhead, run_simulation, sweep_failures, write_artifacts};
use ftmr_core::{BackupMode, Error, JobConfig};

#[derive(Parser)]
#[command(name = "ftmr", version, about = "Fault-tolerant MapReduce simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one benchmark under an optional failure plan.
    Run(JobArgs),
    /// Fail every PE (or group) at every step and compare with a fault-free run.
    Sweep(JobArgs),
    /// Measure backup volume relative to shuffle volume on uniform keys.
    Overhead(OverheadArgs),
}

/// Each flag sets the configuration key of the same name, overriding the
/// value from `--config`.
#[derive(Args)]
struct JobArgs {
    /// key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    benchmark: Option<String>,
    #[arg(long)]
    pes: Option<String>,
    #[arg(long)]
    pes_per_node: Option<String>,
    #[arg(long, env = "FTMR_SEED")]
    seed: Option<String>,
    /// split, single or off.
    #[arg(long)]
    backup_mode: Option<String>,
    /// Steps between recovery points, or `input-only`.
    #[arg(long)]
    recovery_point_interval: Option<String>,
    /// Failure group size, or `none`.
    #[arg(long)]
    groups: Option<String>,
    #[arg(long)]
    single_recoverer: Option<String>,
    /// `step:pe[,pe]` events (repeatable), `fraction=X`, or `none`.
    #[arg(long, alias = "fail")]
    failures: Vec<String>,
    #[arg(long)]
    iterations: Option<String>,
    #[arg(long)]
    vertices_per_pe: Option<String>,
    #[arg(long)]
    avg_degree: Option<String>,
    #[arg(long)]
    words_per_pe: Option<String>,
    #[arg(long)]
    dictionary_size: Option<String>,
    /// Metrics CSV path; printed to stdout when omitted.
    #[arg(long)]
    metrics: Option<String>,
    /// Directory for per-PE output dumps.
    #[arg(long)]
    dump_dir: Option<String>,
}

impl JobArgs {
    fn config(&self) -> ftmr_core::Result<JobConfig> {
        let mut cfg = match &self.config {
            Some(path) => JobConfig::from_text(&std::fs::read_to_string(path)?)?,
            None => JobConfig::from_text("")?,
        };
        let failures = (!self.failures.is_empty()).then(|| self.failures.join(";"));
        let overrides = [
            ("benchmark", &self.benchmark),
            ("pes", &self.pes),
            ("pes_per_node", &self.pes_per_node),
            ("seed", &self.seed),
            ("backup_mode", &self.backup_mode),
            ("recovery_point_interval", &self.recovery_point_interval),
            ("groups", &self.groups),
            ("single_recoverer", &self.single_recoverer),
            ("failures", &failures),
            ("iterations", &self.iterations),
            ("vertices_per_pe", &self.vertices_per_pe),
            ("avg_degree", &self.avg_degree),
            ("words_per_pe", &self.words_per_pe),
            ("dictionary_size", &self.dictionary_size),
            ("metrics", &self.metrics),
            ("dump_dir", &self.dump_dir),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct OverheadArgs {
    #[arg(long, default_value_t = 16)]
    pes: usize,
    /// Total records across all PEs.
    #[arg(long, default_value_t = 100_000)]
    records: u64,
    /// Number of seeds, starting at `--seed`.
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    #[arg(long, env = "FTMR_SEED", default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "split")]
    backup_mode: String,
    /// Allowed relative deviation of the mean ratio from 1/(p-1).
    #[arg(long, default_value_t = 0.25)]
    tolerance: f64,
}

enum Failure {
    Error(Error),
    Violation(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

fn run(args: &JobArgs) -> Result<(), Failure> {
    let cfg = args.config()?;
    let outcome = run_simulation(&cfg)?;
    write_artifacts(&cfg, &outcome.output)?;
    if cfg.metrics.is_none() {
        print!("{}", outcome.output.metrics.to_csv());
    }
    if !outcome.exactly_once() {
        let mismatches = outcome
            .output
            .ledger
            .map(|l| l.mismatches)
            .unwrap_or_default();
        return Err(Failure::Violation(format!(
            "delivery ledger mismatch: {mismatches:?}"
        )));
    }
    log::info!(
        "{} finished after {} steps with {} recoveries",
        cfg.bench.benchmark,
        outcome.output.steps(),
        outcome.output.metrics.recoveries.len()
    );
    Ok(())
}

fn sweep(args: &JobArgs) -> Result<(), Failure> {
    let report = sweep_failures(&args.config()?)?;
    print!("{}", report.summary());
    if report.all_passed() {
        Ok(())
    } else {
        Err(Failure::Violation(format!(
            "{} of {} positions failed",
            report.positions() - report.passed(),
            report.positions()
        )))
    }
}

fn overhead(args: &OverheadArgs) -> Result<(), Failure> {
    let mode: BackupMode = args.backup_mode.parse()?;
    let seeds: Vec<u64> = (0..args.seeds).map(|i| args.seed.wrapping_add(i)).collect();
    let stats = measure_overhead(args.pes, args.records, &seeds, mode)?;
    let ratios: Vec<String> = stats.ratios.iter().map(|r| format!("{r:.6}")).collect();
    println!("pes={}", stats.pes);
    println!("mode={}", stats.mode.as_str());
    println!("ratios={}", ratios.join(","));
    println!("mean={:.6}", stats.mean);
    println!("spread={:.6}", stats.spread);
    println!("reference={:.6} (1/{})", stats.reference, stats.pes - 1);
    println!("max_over_mean_backup={:.4}", stats.max_over_mean_backup);
    let deviation = (stats.mean - stats.reference).abs() / stats.reference;
    if mode != BackupMode::Off && deviation > args.tolerance {
        return Err(Failure::Violation(format!(
            "mean ratio {:.6} is {:.1}% away from 1/{}",
            stats.mean,
            deviation * 100.0,
            stats.pes - 1
        )));
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::FailurePlan(_) => 2,
        Error::Unrecoverable { .. } => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run(args),
        Command::Sweep(args) => sweep(args),
        Command::Overhead(args) => overhead(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(Failure::Violation(msg)) => {
            eprintln!("violation: {msg}");
            ExitCode::from(4)
        }
    }
}
