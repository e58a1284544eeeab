//! Simulation driver: failure plans, differential sweeps against fault-free
//! runs, and overhead measurement.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::benchmarks::{
    compare_outputs, Benchmark, IdentityJob, OutputDiff, UniformKeys, Workload,
};
use crate::config::{format_failure_event, FailureSpec, JobConfig};
use crate::engine::{run_job, EngineConfig, FtConfig, JobOutput, RecoveryPoints};
use crate::error::{Error, Result};
use crate::hash::mix_seed;
use crate::partition::BackupMode;
use crate::record::{encode_records, PeId, StepId};
use crate::recovery::FailureEvent;

pub const SWEEP_MAX_PES: usize = 16;
pub const SWEEP_MAX_STEPS: u64 = 64;
pub const PAGERANK_TOLERANCE: f64 = 1e-12;

/// Picks `round(fraction * nodes)` distinct nodes and fails each one alone at
/// its own step, drawn uniformly from `1..=total_steps`.
pub fn generate_failures(
    seed: u64,
    fraction: f64,
    pes: usize,
    pes_per_node: usize,
    total_steps: u64,
) -> Result<Vec<FailureEvent>> {
    if pes_per_node == 0 || !pes.is_multiple_of(pes_per_node) {
        return Err(Error::FailurePlan(format!(
            "{pes_per_node} PEs per node does not divide {pes}"
        )));
    }
    let nodes = pes / pes_per_node;
    let count = (fraction * nodes as f64).round() as usize;
    if count >= nodes {
        return Err(Error::FailurePlan(format!(
            "failing {count} of {nodes} nodes leaves no survivor"
        )));
    }
    if count as u64 > total_steps {
        return Err(Error::FailurePlan(format!(
            "{count} failures do not fit into {total_steps} steps one at a time"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0xFA11));
    let victims = sample(&mut rng, nodes, count).into_vec();
    let mut steps: Vec<u64> = sample(&mut rng, total_steps as usize, count)
        .into_iter()
        .map(|s| s as u64 + 1)
        .collect();
    steps.sort_unstable();
    Ok(steps
        .into_iter()
        .zip(victims)
        .map(|(step, node)| FailureEvent {
            step: StepId(step),
            failed: (node * pes_per_node..(node + 1) * pes_per_node)
                .map(|i| PeId(i as u32))
                .collect(),
        })
        .collect())
}

#[derive(Debug)]
pub struct SimOutcome {
    pub output: JobOutput,
    /// Failure events that were scheduled.
    pub events: Vec<FailureEvent>,
}

impl SimOutcome {
    pub fn exactly_once(&self) -> bool {
        self.output.ledger.as_ref().is_none_or(|l| l.exactly_once())
    }
}

fn run_with(cfg: &JobConfig, ft: FtConfig, events: &[FailureEvent]) -> Result<JobOutput> {
    let workload = Workload::build(&cfg.bench, cfg.pes)?;
    let engine = EngineConfig::new(cfg.pes, ft).with_ledger();
    run_job(
        workload.job.as_ref(),
        workload.source.as_ref(),
        &engine,
        events,
    )
}

/// Runs the configured job under its failure plan. A generated plan is laid
/// out over the step count of a fault-free dry run.
pub fn run_simulation(cfg: &JobConfig) -> Result<SimOutcome> {
    cfg.validate()?;
    let ft = cfg.ft_config(cfg.backup_mode)?;
    let events = match &cfg.failures {
        FailureSpec::None => Vec::new(),
        FailureSpec::Events(events) => events.clone(),
        FailureSpec::Fraction(fraction) => {
            let dry = run_with(cfg, FtConfig::off(), &[])?;
            generate_failures(
                cfg.seed(),
                *fraction,
                cfg.pes,
                cfg.pes_per_node,
                dry.steps(),
            )?
        }
    };
    let output = run_with(cfg, ft, &events)?;
    if let Some(e) = output.unfired.first() {
        log::warn!(
            "failure at {} never fired: the job finished after {} steps",
            e.step,
            output.steps()
        );
    }
    Ok(SimOutcome { output, events })
}

/// Writes the metrics CSV and the per-PE output dumps (`pe<id>.out` in the
/// record wire format) to the paths named in `cfg`.
pub fn write_artifacts(cfg: &JobConfig, output: &JobOutput) -> Result<()> {
    if let Some(path) = &cfg.metrics {
        std::fs::write(path, output.metrics.to_csv())?;
    }
    if let Some(dir) = &cfg.dump_dir {
        std::fs::create_dir_all(dir)?;
        for (pe, records) in &output.outputs {
            std::fs::write(
                dir.join(format!("pe{}.out", pe.0)),
                encode_records(records)?,
            )?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Pass,
    WrongOutput(String),
    LedgerViolation(String),
    Error(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositionResult {
    pub event: FailureEvent,
    pub mode: BackupMode,
    pub verdict: Verdict,
    /// Largest PageRank score deviation from the fault-free run.
    pub max_deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub benchmark: Benchmark,
    pub steps: u64,
    pub results: Vec<PositionResult>,
    /// Configuration text, for reproducing counterexamples.
    pub config_text: String,
}

impl SweepReport {
    /// Number of (step, failure unit) positions.
    pub fn positions(&self) -> usize {
        self.position_keys().len()
    }

    fn position_keys(&self) -> BTreeSet<(StepId, Vec<PeId>)> {
        self.results
            .iter()
            .map(|r| (r.event.step, r.event.failed.iter().copied().collect()))
            .collect()
    }

    /// Positions that passed in every backup mode.
    pub fn passed(&self) -> usize {
        let failed: BTreeSet<(StepId, Vec<PeId>)> = self
            .counterexamples()
            .map(|r| (r.event.step, r.event.failed.iter().copied().collect()))
            .collect();
        self.positions() - failed.len()
    }

    pub fn all_passed(&self) -> bool {
        self.counterexamples().next().is_none()
    }

    pub fn counterexamples(&self) -> impl Iterator<Item = &PositionResult> {
        self.results.iter().filter(|r| r.verdict != Verdict::Pass)
    }

    pub fn max_deviation(&self) -> f64 {
        self.results
            .iter()
            .map(|r| r.max_deviation)
            .fold(0.0, f64::max)
    }

    /// `N/M passed` followed by one line per counterexample.
    pub fn summary(&self) -> String {
        let mut out = format!(
            "{}: {}/{} passed ({} steps, max deviation {:e})\n",
            self.benchmark,
            self.passed(),
            self.positions(),
            self.steps,
            self.max_deviation()
        );
        for r in self.counterexamples() {
            out.push_str(&format!(
                "counterexample: fail {} mode={}: {:?}\n",
                format_failure_event(&r.event),
                r.mode.as_str(),
                r.verdict
            ));
        }
        if !self.all_passed() {
            out.push_str("configuration:\n");
            out.push_str(&self.config_text);
        }
        out
    }
}

/// Failure units: the configured groups, else every PE on its own.
fn failure_units(cfg: &JobConfig) -> Vec<BTreeSet<PeId>> {
    let size = cfg.group_size().unwrap_or(1);
    (0..cfg.pes / size)
        .map(|g| (g * size..(g + 1) * size).map(|i| PeId(i as u32)).collect())
        .collect()
}

/// Fails every unit at every step, in split and single mode, and compares
/// each run with the fault-free run.
pub fn sweep_failures(cfg: &JobConfig) -> Result<SweepReport> {
    cfg.validate()?;
    if cfg.pes > SWEEP_MAX_PES {
        return Err(Error::Config(format!(
            "sweep is limited to {SWEEP_MAX_PES} PEs, got {}",
            cfg.pes
        )));
    }
    let baseline = run_with(cfg, cfg.ft_config(BackupMode::Split)?, &[])?;
    let steps = baseline.steps();
    if steps > SWEEP_MAX_STEPS {
        return Err(Error::Config(format!(
            "sweep is limited to {SWEEP_MAX_STEPS} steps, job runs {steps}"
        )));
    }
    let reference = baseline.sorted_records();
    let reference_digests = baseline.ledger.as_ref().map(|l| l.digests.clone());
    let mut results = Vec::new();
    for step in 1..=steps {
        for unit in failure_units(cfg) {
            let event = FailureEvent {
                step: StepId(step),
                failed: unit,
            };
            for mode in [BackupMode::Split, BackupMode::Single] {
                let outcome = run_with(cfg, cfg.ft_config(mode)?, std::slice::from_ref(&event));
                let (verdict, max_deviation) = match outcome {
                    Err(e) => (Verdict::Error(e.to_string()), 0.0),
                    Ok(out) => judge(
                        cfg.bench.benchmark,
                        &reference,
                        reference_digests.as_ref(),
                        &out,
                    ),
                };
                results.push(PositionResult {
                    event: event.clone(),
                    mode,
                    verdict,
                    max_deviation,
                });
            }
        }
    }
    Ok(SweepReport {
        benchmark: cfg.bench.benchmark,
        steps,
        results,
        config_text: cfg.to_text(),
    })
}

fn judge(
    benchmark: Benchmark,
    reference: &[crate::record::Record],
    digests: Option<&std::collections::BTreeMap<StepId, crate::ledger::StepDigest>>,
    out: &JobOutput,
) -> (Verdict, f64) {
    let diff = compare_outputs(benchmark, reference, &out.sorted_records());
    let deviation = match &diff {
        OutputDiff::Scores { max_deviation } => *max_deviation,
        _ => 0.0,
    };
    if !diff.within(PAGERANK_TOLERANCE) {
        let why = match diff {
            OutputDiff::Different(why) => why,
            other => format!("{other:?}"),
        };
        return (Verdict::WrongOutput(why), deviation);
    }
    if let Some(ledger) = &out.ledger {
        if !ledger.exactly_once() {
            return (
                Verdict::LedgerViolation(format!("{:?}", ledger.mismatches)),
                deviation,
            );
        }
        if let Some(reference) = digests {
            if let Some((step, _)) = ledger
                .digests
                .iter()
                .find(|(s, d)| reference.get(s) != Some(d))
            {
                return (
                    Verdict::LedgerViolation(format!(
                        "deliveries at {step} differ from the fault-free run"
                    )),
                    deviation,
                );
            }
        }
    }
    (Verdict::Pass, deviation)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverheadStats {
    pub pes: usize,
    pub mode: BackupMode,
    /// Backup volume over network volume, per seed.
    pub ratios: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation of the ratios.
    pub spread: f64,
    /// Expected ratio `1 / (p - 1)`.
    pub reference: f64,
    /// Per-step maximum over PEs of backup bytes received, worst over seeds
    /// and steps, relative to the per-PE mean of that step.
    pub max_over_mean_backup: f64,
}

/// Runs one identity step over `records` uniformly random keys per seed,
/// without failures.
pub fn measure_overhead(
    pes: usize,
    records: u64,
    seeds: &[u64],
    mode: BackupMode,
) -> Result<OverheadStats> {
    if pes < 2 {
        return Err(Error::Config("overhead needs at least 2 PEs".into()));
    }
    if seeds.is_empty() {
        return Err(Error::Config("overhead needs at least one seed".into()));
    }
    let ft = FtConfig {
        backup: mode,
        recovery_points: RecoveryPoints::Every(1),
        groups: None,
        single_recoverer: false,
    };
    let cfg = EngineConfig::new(pes, ft);
    let mut ratios = Vec::with_capacity(seeds.len());
    let mut max_over_mean: f64 = 0.0;
    for &seed in seeds {
        let source = UniformKeys::total(seed, records, pes);
        let out = run_job(&IdentityJob { steps: 1 }, &source, &cfg, &[])?;
        ratios.push(out.metrics.relative_overhead());
        for s in &out.metrics.steps {
            let total: u64 = s.backup_received.iter().sum();
            if total > 0 {
                let mean = total as f64 / pes as f64;
                max_over_mean = max_over_mean.max(s.max_backup_received() as f64 / mean);
            }
        }
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let spread = if ratios.len() > 1 {
        (ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (ratios.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(OverheadStats {
        pes,
        mode,
        ratios,
        mean,
        spread,
        reference: 1.0 / (pes as f64 - 1.0),
        max_over_mean_backup: max_over_mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_mode_concentrates_backups() {
        let split = measure_overhead(8, 20_000, &[1, 2], BackupMode::Split).unwrap();
        let single = measure_overhead(8, 20_000, &[1, 2], BackupMode::Single).unwrap();
        assert!(split.max_over_mean_backup <= 2.0);
        assert!((single.mean - split.mean).abs() < 1e-9);
        let ft = FtConfig {
            backup: BackupMode::Single,
            ..Default::default()
        };
        let source = UniformKeys::total(1, 8_000, 8);
        crate::engine::run_job_observed(
            &IdentityJob { steps: 1 },
            &source,
            &EngineConfig::new(8, ft),
            &[],
            &mut |stage, c| {
                let crate::engine::Stage::Shuffled(t) = stage else {
                    return;
                };
                for share in c.manifest(t) {
                    assert_eq!(share.of, 1, "whole self-message goes to one PE");
                    assert_eq!(share.holder.0, (share.origin.0 + 1) % 8);
                }
            },
        )
        .unwrap();
    }

    #[test]
    fn overhead_tracks_one_over_p_minus_one() {
        let stats = measure_overhead(8, 40_000, &[3], BackupMode::Split).unwrap();
        assert!((stats.mean - 1.0 / 7.0).abs() < 0.25 / 7.0, "{stats:?}");
        assert!(measure_overhead(1, 10, &[1], BackupMode::Split).is_err());
    }

    #[test]
    fn generated_plan_ten_percent_of_twenty() {
        let events = generate_failures(5, 0.1, 20, 1, 10).unwrap();
        assert_eq!(events.len(), 2);
        assert!(events.iter().all(|e| e.failed.len() == 1));
        assert!(events[0].step < events[1].step);
        assert_ne!(events[0].failed, events[1].failed);
        assert_eq!(events, generate_failures(5, 0.1, 20, 1, 10).unwrap());
    }

    #[test]
    fn generated_plan_fails_whole_nodes() {
        let events = generate_failures(1, 0.25, 16, 4, 8).unwrap();
        assert_eq!(events.len(), 1);
        let pes: Vec<u32> = events[0].failed.iter().map(|p| p.0).collect();
        assert_eq!(pes.len(), 4);
        assert_eq!(pes[0] % 4, 0);
        assert_eq!(pes[3], pes[0] + 3);
    }

    #[test]
    fn generated_plan_limits() {
        assert!(generate_failures(1, 0.9, 4, 1, 10).is_err());
        assert!(generate_failures(1, 0.5, 8, 1, 2).is_err());
        assert!(generate_failures(1, 0.0, 8, 1, 0).unwrap().is_empty());
    }
}
