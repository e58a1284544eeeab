//! Job configuration and its `key=value` text form.
//!
//! ```text
//! # comments and blank lines are ignored
//! benchmark=pagerank
//! pes=8
//! backup_mode=split
//! recovery_point_interval=3
//! failures=2:1;4:5
//! ```
//!
//! [`JobConfig::to_text`] writes every field, and [`JobConfig::from_text`]
//! accepts any subset, filling in defaults.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::benchmarks::{BenchParams, Benchmark};
use crate::engine::{EngineConfig, FtConfig, RecoveryPoints};
use crate::error::{Error, Result};
use crate::partition::{BackupMode, FailureGroups};
use crate::record::{PeId, StepId};
use crate::recovery::FailureEvent;

#[derive(Debug, Clone, PartialEq)]
pub enum FailureSpec {
    None,
    Events(Vec<FailureEvent>),
    /// Fail this fraction of the nodes, one node per step, at seeded steps.
    Fraction(f64),
}

/// Parses `step:pe[,pe...]`.
pub fn parse_failure_event(s: &str) -> Result<FailureEvent> {
    let bad = |why: &str| Error::Config(format!("bad failure event {s:?}: {why}"));
    let (step, pes) = s
        .trim()
        .split_once(':')
        .ok_or_else(|| bad("expected step:pe[,pe]"))?;
    let step: u64 = step
        .trim()
        .parse()
        .map_err(|_| bad("step is not an integer"))?;
    if step == 0 {
        return Err(bad("failures can only be injected at step 1 or later"));
    }
    let mut failed = std::collections::BTreeSet::new();
    for pe in pes.split(',') {
        let pe: u32 = pe.trim().parse().map_err(|_| bad("PE is not an integer"))?;
        if !failed.insert(PeId(pe)) {
            return Err(bad("PE listed twice"));
        }
    }
    Ok(FailureEvent {
        step: StepId(step),
        failed,
    })
}

/// Parses `none`, `fraction=X`, or `;`-separated events.
pub fn parse_failure_spec(s: &str) -> Result<FailureSpec> {
    let s = s.trim();
    if s.is_empty() || s == "none" {
        return Ok(FailureSpec::None);
    }
    if let Some(x) = s.strip_prefix("fraction=") {
        let x: f64 = x
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad failure fraction {x:?}")))?;
        return Ok(FailureSpec::Fraction(x));
    }
    let events = s
        .split(';')
        .filter(|e| !e.trim().is_empty())
        .map(parse_failure_event)
        .collect::<Result<Vec<_>>>()?;
    Ok(FailureSpec::Events(events))
}

pub fn format_failure_event(e: &FailureEvent) -> String {
    let pes: Vec<String> = e.failed.iter().map(|p| p.0.to_string()).collect();
    format!("{}:{}", e.step.0, pes.join(","))
}

fn format_failure_spec(spec: &FailureSpec) -> String {
    match spec {
        FailureSpec::None => "none".into(),
        FailureSpec::Fraction(x) => format!("fraction={x}"),
        FailureSpec::Events(events) => events
            .iter()
            .map(format_failure_event)
            .collect::<Vec<_>>()
            .join(";"),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JobConfig {
    pub bench: BenchParams,
    pub pes: usize,
    pub pes_per_node: usize,
    pub backup_mode: BackupMode,
    pub recovery_points: RecoveryPoints,
    /// Size of consecutive failure groups.
    pub groups: Option<usize>,
    pub single_recoverer: bool,
    pub failures: FailureSpec,
    pub metrics: Option<PathBuf>,
    pub dump_dir: Option<PathBuf>,
}

impl JobConfig {
    pub fn new(benchmark: Benchmark, pes: usize, seed: u64) -> Self {
        JobConfig {
            bench: BenchParams::new(benchmark, seed),
            pes,
            pes_per_node: 1,
            backup_mode: BackupMode::Split,
            recovery_points: RecoveryPoints::Every(1),
            groups: None,
            single_recoverer: false,
            failures: FailureSpec::None,
            metrics: None,
            dump_dir: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.bench.seed
    }

    /// Group size in effect: explicit groups, else one group per node when
    /// nodes hold several PEs.
    pub fn group_size(&self) -> Option<usize> {
        self.groups
            .or((self.pes_per_node > 1).then_some(self.pes_per_node))
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |msg: String| Err(Error::Config(msg));
        if self.pes == 0 {
            return cfg("pes must be positive".into());
        }
        if self.pes_per_node == 0 || !self.pes.is_multiple_of(self.pes_per_node) {
            return cfg(format!(
                "pes_per_node {} does not divide pes {}",
                self.pes_per_node, self.pes
            ));
        }
        if let RecoveryPoints::Every(0) = self.recovery_points {
            return cfg("recovery_point_interval must be positive".into());
        }
        if let Some(g) = self.groups {
            if g == 0 || !self.pes.is_multiple_of(g) {
                return cfg(format!("group size {g} does not divide pes {}", self.pes));
            }
            if g % self.pes_per_node != 0 {
                return cfg(format!(
                    "group size {g} splits nodes of {} PEs",
                    self.pes_per_node
                ));
            }
        }
        if let Some(g) = self.group_size() {
            if g == self.pes && self.pes > 1 && self.backup_mode != BackupMode::Off {
                return cfg(format!(
                    "a single failure group of all {} PEs leaves no PE outside it to hold backups",
                    self.pes
                ));
            }
        }
        if self.single_recoverer && self.backup_mode == BackupMode::Off {
            return cfg("single_recoverer requires message logging".into());
        }
        match &self.failures {
            FailureSpec::Fraction(x) if !(0.0..1.0).contains(x) => {
                return cfg(format!("failure fraction {x} must be in [0, 1)"));
            }
            FailureSpec::Events(events) => {
                crate::recovery::validate_plan(events, self.pes)
                    .map_err(|e| Error::Config(e.to_string()))?;
                let mut seen = std::collections::BTreeSet::new();
                for pe in events.iter().flat_map(|e| &e.failed) {
                    if !seen.insert(*pe) {
                        return cfg(format!("{pe} fails more than once"));
                    }
                }
            }
            _ => {}
        }
        if self.bench.benchmark == Benchmark::PageRank && self.bench.iterations == 0 {
            return cfg("iterations must be positive".into());
        }
        if let Some(avg) = self.bench.avg_degree {
            if !avg.is_finite() || avg < 0.0 {
                return cfg(format!("invalid average degree {avg}"));
            }
        }
        Ok(())
    }

    pub fn ft_config(&self, backup: BackupMode) -> Result<FtConfig> {
        let groups = match self.group_size() {
            Some(g) => Some(FailureGroups::consecutive(self.pes, g)?),
            None => None,
        };
        Ok(FtConfig {
            backup,
            recovery_points: self.recovery_points.clone(),
            groups,
            single_recoverer: self.single_recoverer,
        })
    }

    pub fn engine_config(&self) -> Result<EngineConfig> {
        Ok(EngineConfig::new(
            self.pes,
            self.ft_config(self.backup_mode)?,
        ))
    }

    pub fn to_text(&self) -> String {
        let b = &self.bench;
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        kv("benchmark", b.benchmark.to_string());
        kv("pes", self.pes.to_string());
        kv("pes_per_node", self.pes_per_node.to_string());
        kv("seed", b.seed.to_string());
        kv("backup_mode", self.backup_mode.as_str().into());
        kv(
            "recovery_point_interval",
            format_interval(&self.recovery_points),
        );
        kv(
            "groups",
            self.groups.map_or("none".into(), |g| g.to_string()),
        );
        kv("single_recoverer", self.single_recoverer.to_string());
        kv("failures", format_failure_spec(&self.failures));
        kv("iterations", b.iterations.to_string());
        kv("vertices_per_pe", b.vertices_per_pe.to_string());
        kv(
            "avg_degree",
            b.avg_degree.map_or("default".into(), |d| d.to_string()),
        );
        kv("words_per_pe", b.words_per_pe.to_string());
        kv("dictionary_size", b.dictionary_size.to_string());
        kv("metrics", path_text(&self.metrics));
        kv("dump_dir", path_text(&self.dump_dir));
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = JobConfig::new(Benchmark::WordCount, 4, 0);
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", lineno + 1)))?;
            cfg.set(k.trim(), v.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one field from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
        }
        let b = &mut self.bench;
        match key {
            "benchmark" => b.benchmark = value.parse()?,
            "pes" => self.pes = num(key, value)?,
            "pes_per_node" => self.pes_per_node = num(key, value)?,
            "seed" => b.seed = num(key, value)?,
            "backup_mode" => self.backup_mode = value.parse()?,
            "recovery_point_interval" => self.recovery_points = parse_interval(value)?,
            "groups" => {
                self.groups = match value {
                    "none" => None,
                    v => Some(num(key, v)?),
                }
            }
            "single_recoverer" => self.single_recoverer = num(key, value)?,
            "failures" => self.failures = parse_failure_spec(value)?,
            "iterations" => b.iterations = num(key, value)?,
            "vertices_per_pe" => b.vertices_per_pe = num(key, value)?,
            "avg_degree" => {
                b.avg_degree = match value {
                    "default" => None,
                    v => Some(num(key, v)?),
                }
            }
            "words_per_pe" => b.words_per_pe = num(key, value)?,
            "dictionary_size" => b.dictionary_size = num(key, value)?,
            "metrics" => self.metrics = parse_path(value),
            "dump_dir" => self.dump_dir = parse_path(value),
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }
}

pub fn parse_interval(s: &str) -> Result<RecoveryPoints> {
    match s {
        "input-only" => Ok(RecoveryPoints::InputOnly),
        v => match v.parse::<u64>() {
            Ok(k) if k > 0 => Ok(RecoveryPoints::Every(k)),
            _ => Err(Error::Config(format!(
                "recovery_point_interval must be a positive integer or input-only, got {v:?}"
            ))),
        },
    }
}

fn format_interval(rp: &RecoveryPoints) -> String {
    match rp {
        RecoveryPoints::Every(k) => k.to_string(),
        RecoveryPoints::InputOnly => "input-only".into(),
        RecoveryPoints::At(steps) => steps
            .iter()
            .map(u64::to_string)
            .collect::<Vec<_>>()
            .join(","),
    }
}

fn path_text(p: &Option<PathBuf>) -> String {
    p.as_ref()
        .map_or("none".into(), |p| p.display().to_string())
}

fn parse_path(v: &str) -> Option<PathBuf> {
    (v != "none" && !v.is_empty()).then(|| PathBuf::from(v))
}
