//! BSP MapReduce execution over virtual PEs with message logging.
//!
//! Each step runs Map on every live PE, a shuffle that routes records to the
//! owner of their key's hash range, and Reduce. During the shuffle every PE
//! keeps a copy of what it sent (`sent_log`). At recovery points the
//! self-messages, which no other PE holds, are additionally split into shares
//! and stored on peers (`backup_store`). Failures are injected at the shuffle
//! barrier, after the exchange and before Reduce; see [`crate::recovery`].

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::error::{Error, Result, UserFnError};
use crate::ledger::{DeliveryLedger, Generation, LedgerReport};
use crate::metrics::{Metrics, StepMetrics};
use crate::partition::{split_self_message, BackupMode, BackupPlan, FailureGroups, PartitionMap};
use crate::record::{Message, MessageKind, PeId, Record, StepId};
use crate::recovery::FailureEvent;

/// Identifies the functions a step runs. `phase` is chosen by the job and
/// lets iterative jobs alternate between different map/reduce pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepCtx {
    pub step: StepId,
    pub phase: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepSummary {
    pub ctx: StepCtx,
    /// Sum of the counters returned by every Reduce call of the step.
    pub aggregate: u64,
}

/// A (possibly iterative) MapReduce job.
///
/// Map and Reduce must be deterministic functions of their arguments, and
/// Reduce must not depend on the order of `values`: recovery regroups data on
/// different PEs, which may present values in a different order.
pub trait Job: Sync {
    fn map(&self, ctx: StepCtx, record: &Record, out: &mut Vec<Record>) -> Result<(), UserFnError>;

    /// Returns a counter contribution that is summed into the step's
    /// aggregate (e.g. number of changes, for convergence tests).
    fn reduce(
        &self,
        ctx: StepCtx,
        key: &[u8],
        values: &[&[u8]],
        out: &mut Vec<Record>,
    ) -> Result<u64, UserFnError>;

    /// Phase of the next step given all completed steps, or `None` when done.
    fn next_phase(&self, history: &[StepSummary]) -> Option<u32>;

    fn max_steps(&self) -> u64 {
        10_000
    }
}

/// Per-PE input generator. Must be replayable: calling `generate` again for
/// the same PE yields the same records.
pub trait Source: Sync {
    fn generate(&self, pe: PeId, p: usize) -> Vec<Record>;

    fn replayable(&self) -> bool {
        true
    }
}

/// Input given explicitly per PE.
#[derive(Debug, Clone, Default)]
pub struct FixedSource(pub Vec<Vec<Record>>);

impl Source for FixedSource {
    fn generate(&self, pe: PeId, _p: usize) -> Vec<Record> {
        self.0.get(pe.index()).cloned().unwrap_or_default()
    }
}

pub type MapFn = Box<dyn Fn(&Record, &mut Vec<Record>) -> Result<(), UserFnError> + Send + Sync>;
pub type ReduceFn =
    Box<dyn Fn(&[u8], &[&[u8]], &mut Vec<Record>) -> Result<u64, UserFnError> + Send + Sync>;

/// A fixed chain of MapReduce steps; step `k` runs the `k`-th pair.
pub struct StepsJob {
    steps: Vec<(MapFn, ReduceFn)>,
}

impl StepsJob {
    pub fn new(steps: Vec<(MapFn, ReduceFn)>) -> Self {
        StepsJob { steps }
    }

    pub fn identity_map() -> MapFn {
        Box::new(|r, out| {
            out.push(r.clone());
            Ok(())
        })
    }

    pub fn identity_reduce() -> ReduceFn {
        Box::new(|k, vs, out| {
            out.extend(vs.iter().map(|v| Record::new(k, *v)));
            Ok(0)
        })
    }
}

impl Job for StepsJob {
    fn map(&self, ctx: StepCtx, record: &Record, out: &mut Vec<Record>) -> Result<(), UserFnError> {
        (self.steps[ctx.phase as usize].0)(record, out)
    }

    fn reduce(
        &self,
        ctx: StepCtx,
        key: &[u8],
        values: &[&[u8]],
        out: &mut Vec<Record>,
    ) -> Result<u64, UserFnError> {
        (self.steps[ctx.phase as usize].1)(key, values, out)
    }

    fn next_phase(&self, history: &[StepSummary]) -> Option<u32> {
        (history.len() < self.steps.len()).then_some(history.len() as u32)
    }
}

/// Which shuffles are recovery points. Step 0 (input) always is one, since
/// the input can be regenerated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RecoveryPoints {
    /// Every `k`-th step (steps divisible by `k`).
    Every(u64),
    /// Only the input; self-messages are never backed up.
    InputOnly,
    At(BTreeSet<u64>),
}

impl Default for RecoveryPoints {
    fn default() -> Self {
        RecoveryPoints::Every(1)
    }
}

impl RecoveryPoints {
    pub fn is_recovery_point(&self, step: StepId) -> bool {
        step.0 == 0
            || match self {
                RecoveryPoints::Every(k) => *k > 0 && step.0.is_multiple_of(*k),
                RecoveryPoints::InputOnly => false,
                RecoveryPoints::At(set) => set.contains(&step.0),
            }
    }

    pub fn last_at_or_before(&self, step: StepId) -> StepId {
        StepId(match self {
            RecoveryPoints::Every(k) if *k > 0 => step.0 / k * k,
            RecoveryPoints::Every(_) | RecoveryPoints::InputOnly => 0,
            RecoveryPoints::At(set) => set.range(..=step.0).next_back().copied().unwrap_or(0),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FtConfig {
    pub backup: BackupMode,
    pub recovery_points: RecoveryPoints,
    pub groups: Option<FailureGroups>,
    /// Funnel all recovery work through one survivor instead of spreading it.
    pub single_recoverer: bool,
}

impl FtConfig {
    pub fn off() -> Self {
        FtConfig {
            backup: BackupMode::Off,
            ..Default::default()
        }
    }

    pub fn logging(&self) -> bool {
        self.backup != BackupMode::Off
    }

    /// Whether self-messages of `step` are backed up.
    pub fn backs_up(&self, step: StepId) -> bool {
        self.logging() && step.0 > 0 && self.recovery_points.is_recovery_point(step)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngineConfig {
    pub pes: usize,
    pub ft: FtConfig,
    pub ledger: bool,
}

impl EngineConfig {
    pub fn new(pes: usize, ft: FtConfig) -> Self {
        EngineConfig {
            pes,
            ft,
            ledger: false,
        }
    }

    pub fn with_ledger(mut self) -> Self {
        self.ledger = true;
        self
    }
}

#[derive(Debug, Clone, Default)]
pub struct PeState {
    pub id: PeId,
    pub alive: bool,
    /// Output of the last Map (pre-shuffle) or Reduce.
    pub current: Vec<Record>,
    /// Messages received in the current shuffle, consumed by Reduce.
    pub inbox: Vec<Message>,
    pub sent_log: BTreeMap<StepId, BTreeMap<PeId, Vec<Message>>>,
    pub backup_store: BTreeMap<StepId, Vec<Message>>,
}

impl PeState {
    fn new(id: PeId) -> Self {
        PeState {
            id,
            alive: true,
            ..Default::default()
        }
    }

    pub fn logged_bytes(&self) -> u64 {
        let sent: u64 = self
            .sent_log
            .values()
            .flat_map(|m| m.values())
            .flatten()
            .map(Message::bytes)
            .sum();
        let backed: u64 = self
            .backup_store
            .values()
            .flatten()
            .map(Message::bytes)
            .sum();
        sent + backed
    }

    /// Canonical encoding of `current`, used to compare states.
    pub fn encode_current(&self) -> Result<Vec<u8>> {
        crate::record::encode_records(&self.current)
    }
}

/// Coordinator-side record of where a backup share lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShareRecord {
    pub origin: PeId,
    pub dest: PeId,
    pub msg: u32,
    pub share: u32,
    pub of: u32,
    pub holder: PeId,
}

/// Where a stage of [`run_job_observed`] stopped to call the observer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// After the exchange (and before any recovery) of a step.
    Shuffled(StepId),
    /// After Reduce and log garbage collection of a step.
    Reduced(StepId),
}

#[derive(Debug, Default)]
pub(crate) struct ExchangeStats {
    pub network_bytes: u64,
    pub self_bytes: u64,
    pub backup_bytes: u64,
    pub records: u64,
    pub shuffled_bytes: u64,
    pub max_record: u64,
    pub backup_received: BTreeMap<PeId, u64>,
}

/// The virtual cluster: all PE states plus coordinator metadata.
#[derive(Debug)]
pub struct Cluster {
    pub(crate) pes: Vec<PeState>,
    pub(crate) pm: PartitionMap,
    /// Partition map in effect at each retained step's shuffle.
    pub(crate) pm_at: BTreeMap<StepId, PartitionMap>,
    pub(crate) phases: BTreeMap<StepId, u32>,
    pub(crate) manifest: BTreeMap<StepId, Vec<ShareRecord>>,
    /// Origins whose self-message at a step could not be backed up.
    pub(crate) unprotected: BTreeMap<StepId, BTreeSet<PeId>>,
    pub(crate) plan: BackupPlan,
    pub(crate) ft: FtConfig,
    pub(crate) metrics: Metrics,
    pub(crate) ledger: Option<DeliveryLedger>,
    pub(crate) last_failure: Option<StepId>,
    /// Failure steps that recovery turned into recovery points.
    pub(crate) promoted: BTreeSet<StepId>,
    warned_no_target: bool,
}

impl Cluster {
    pub fn new(cfg: &EngineConfig) -> Result<Self> {
        let pm = PartitionMap::initial(cfg.pes).map_err(|e| Error::Config(e.to_string()))?;
        let mut plan = BackupPlan::new(cfg.ft.backup, cfg.pes);
        if let Some(groups) = &cfg.ft.groups {
            if groups.len() != cfg.pes {
                return Err(Error::Config(format!(
                    "failure groups cover {} PEs, cluster has {}",
                    groups.len(),
                    cfg.pes
                )));
            }
            plan = plan.with_groups(groups.clone());
        }
        if let RecoveryPoints::Every(0) = cfg.ft.recovery_points {
            return Err(Error::Config(
                "recovery point interval must be positive".into(),
            ));
        }
        Ok(Cluster {
            pes: (0..cfg.pes).map(|i| PeState::new(PeId(i as u32))).collect(),
            pm,
            pm_at: BTreeMap::new(),
            phases: BTreeMap::new(),
            manifest: BTreeMap::new(),
            unprotected: BTreeMap::new(),
            plan,
            ft: cfg.ft.clone(),
            metrics: Metrics::default(),
            ledger: cfg.ledger.then(DeliveryLedger::new),
            last_failure: None,
            promoted: BTreeSet::new(),
            warned_no_target: false,
        })
    }

    pub fn p_initial(&self) -> usize {
        self.pes.len()
    }

    pub fn pes(&self) -> &[PeState] {
        &self.pes
    }

    pub fn pe(&self, id: PeId) -> &PeState {
        &self.pes[id.index()]
    }

    pub fn partition_map(&self) -> &PartitionMap {
        &self.pm
    }

    pub fn live(&self) -> Vec<PeId> {
        self.pes.iter().filter(|p| p.alive).map(|p| p.id).collect()
    }

    pub fn metrics(&self) -> &Metrics {
        &self.metrics
    }

    pub fn manifest(&self, step: StepId) -> &[ShareRecord] {
        self.manifest.get(&step).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn ft(&self) -> &FtConfig {
        &self.ft
    }

    pub fn backup_plan(&self) -> &BackupPlan {
        &self.plan
    }

    /// Step 0: every PE loads its input partition.
    pub fn ingest(&mut self, source: &dyn Source) {
        let p = self.p_initial();
        self.pes.par_iter_mut().for_each(|pe| {
            pe.current = source.generate(pe.id, p);
        });
        self.metrics.input_bytes = self
            .pes
            .iter()
            .flat_map(|pe| &pe.current)
            .map(Record::size)
            .sum();
        self.pm_at.insert(StepId::INGEST, self.pm.clone());
    }

    pub(crate) fn begin_step(&mut self, ctx: StepCtx) {
        self.phases.insert(ctx.step, ctx.phase);
        self.pm_at.insert(ctx.step, self.pm.clone());
        let rp = self.ft.recovery_points.is_recovery_point(ctx.step);
        self.metrics
            .steps
            .push(StepMetrics::new(ctx.step, rp, self.p_initial()));
    }

    fn step_metrics(&mut self, step: StepId) -> &mut StepMetrics {
        self.metrics
            .steps
            .iter_mut()
            .rev()
            .find(|s| s.step == step)
            .expect("step metrics exist once the step has begun")
    }

    pub fn map_phase(&mut self, job: &dyn Job, ctx: StepCtx) -> Result<()> {
        let results: Vec<Result<u64>> = self
            .pes
            .par_iter_mut()
            .filter(|pe| pe.alive)
            .map(|pe| {
                let input = std::mem::take(&mut pe.current);
                pe.current = map_records(job, ctx, pe.id, &input)?;
                Ok(input.len() as u64)
            })
            .collect();
        let mut calls = 0;
        for r in results {
            calls += r?;
        }
        self.step_metrics(ctx.step).map_calls += calls;
        Ok(())
    }

    /// Routes every live PE's current records to their owners, logging sent
    /// messages and backing up self-messages at recovery points.
    pub fn shuffle(&mut self, ctx: StepCtx) -> Result<()> {
        let step = ctx.step;
        let sends: Vec<(PeId, Vec<Record>)> = self
            .pes
            .iter_mut()
            .filter(|pe| pe.alive)
            .map(|pe| (pe.id, std::mem::take(&mut pe.current)))
            .collect();
        let backups = self.ft.backs_up(step);
        let stats = self.exchange(step, sends, backups, true, Generation::Original);
        let sm = self.step_metrics(step);
        sm.network_bytes += stats.network_bytes;
        sm.self_bytes += stats.self_bytes;
        sm.backup_bytes += stats.backup_bytes;
        sm.records += stats.records;
        sm.shuffled_bytes += stats.shuffled_bytes;
        for (pe, bytes) in &stats.backup_received {
            sm.backup_received[pe.index()] += bytes;
        }
        self.metrics.max_record_bytes = self.metrics.max_record_bytes.max(stats.max_record);
        Ok(())
    }

    /// Delivers records from each sender to the owner of their key under the
    /// current partition map.
    pub(crate) fn exchange(
        &mut self,
        step: StepId,
        sends: Vec<(PeId, Vec<Record>)>,
        backups: bool,
        always_self: bool,
        generation: Generation,
    ) -> ExchangeStats {
        let mut stats = ExchangeStats::default();
        let live = self.pm.live();
        for (src, records) in sends {
            let mut by_dst: BTreeMap<PeId, Vec<Record>> = BTreeMap::new();
            if always_self {
                by_dst.insert(src, Vec::new());
            }
            for r in records {
                stats.max_record = stats.max_record.max(r.size());
                by_dst
                    .entry(self.pm.owner_of_key(&r.key))
                    .or_default()
                    .push(r);
            }
            for (dst, payload) in by_dst {
                let msg = Message::shuffle(src, dst, step, payload);
                let bytes = msg.bytes();
                stats.records += msg.payload.len() as u64;
                stats.shuffled_bytes += bytes;
                if src != dst {
                    stats.network_bytes += bytes;
                }
                if let Some(ledger) = &mut self.ledger {
                    for r in &msg.payload {
                        ledger.record(step, dst, r, generation);
                    }
                }
                let is_self = self.plan.same_unit(src, dst);
                if is_self {
                    stats.self_bytes += bytes;
                }
                if self.ft.logging() {
                    let log = self.pes[src.index()]
                        .sent_log
                        .entry(step)
                        .or_default()
                        .entry(dst)
                        .or_default();
                    log.push(msg.clone());
                    let idx = (log.len() - 1) as u32;
                    if backups && is_self {
                        self.back_up(step, src, dst, idx, &msg.payload, &live, &mut stats);
                    }
                }
                self.pes[dst.index()].inbox.push(msg);
            }
        }
        stats
    }

    /// Splits the self-message `src -> dest` (log entry `msg`) over `src`'s
    /// backup targets.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn back_up(
        &mut self,
        step: StepId,
        src: PeId,
        dest: PeId,
        msg: u32,
        payload: &[Record],
        live: &[PeId],
        stats: &mut ExchangeStats,
    ) {
        let targets = match self.plan.targets(src, live) {
            Ok(t) => t,
            Err(e) => {
                if !self.warned_no_target {
                    log::warn!("backups disabled: {e}");
                    self.warned_no_target = true;
                }
                self.unprotected.entry(step).or_default().insert(src);
                return;
            }
        };
        let of = targets.len() as u32;
        for (share, (target, records)) in split_self_message(payload, &targets)
            .into_iter()
            .enumerate()
        {
            let m = Message {
                src,
                dst: target,
                step,
                kind: MessageKind::BackupShare {
                    origin: src,
                    dest,
                    msg,
                    share: share as u32,
                    of,
                },
                payload: records,
            };
            let bytes = m.bytes();
            stats.backup_bytes += bytes;
            *stats.backup_received.entry(target).or_default() += bytes;
            self.manifest.entry(step).or_default().push(ShareRecord {
                origin: src,
                dest,
                msg,
                share: share as u32,
                of,
                holder: target,
            });
            self.pes[target.index()]
                .backup_store
                .entry(step)
                .or_default()
                .push(m);
        }
    }

    /// Groups each live PE's inbox by key and applies Reduce. Returns the
    /// step aggregate.
    pub fn reduce_phase(&mut self, job: &dyn Job, ctx: StepCtx) -> Result<u64> {
        let results: Vec<Result<(u64, u64)>> = self
            .pes
            .par_iter_mut()
            .filter(|pe| pe.alive)
            .map(|pe| {
                let inbox = std::mem::take(&mut pe.inbox);
                let out = reduce_messages(job, ctx, pe.id, inbox)?;
                pe.current = out.records;
                Ok((out.aggregate, out.calls))
            })
            .collect();
        let (mut aggregate, mut calls) = (0, 0);
        for r in results {
            let (a, c) = r?;
            aggregate += a;
            calls += c;
        }
        self.step_metrics(ctx.step).reduce_calls += calls;
        Ok(aggregate)
    }

    /// Most recent recovery point at or before `step`, including failure
    /// steps promoted by recovery.
    pub fn last_recovery_point(&self, step: StepId) -> StepId {
        let configured = self.ft.recovery_points.last_at_or_before(step);
        self.promoted
            .range(..=step)
            .next_back()
            .map_or(configured, |&p| p.max(configured))
    }

    /// Drops logs, backups and metadata older than the most recent recovery
    /// point at or before `completed`.
    pub fn gc_logs(&mut self, completed: StepId) {
        let horizon = self.last_recovery_point(completed);
        for pe in &mut self.pes {
            pe.sent_log = pe.sent_log.split_off(&horizon);
            pe.backup_store = pe.backup_store.split_off(&horizon);
        }
        self.manifest = self.manifest.split_off(&horizon);
        self.unprotected = self.unprotected.split_off(&horizon);
        self.pm_at = self.pm_at.split_off(&horizon);
        self.phases = self.phases.split_off(&horizon);
        if let Some(ledger) = &mut self.ledger {
            ledger.seal_before(horizon);
        }
    }

    /// Final records of every live PE.
    pub fn outputs(&self) -> Vec<(PeId, Vec<Record>)> {
        self.pes
            .iter()
            .filter(|pe| pe.alive)
            .map(|pe| (pe.id, pe.current.clone()))
            .collect()
    }
}

pub(crate) fn map_records(
    job: &dyn Job,
    ctx: StepCtx,
    pe: PeId,
    input: &[Record],
) -> Result<Vec<Record>> {
    let mut out = Vec::with_capacity(input.len());
    for (index, r) in input.iter().enumerate() {
        job.map(ctx, r, &mut out).map_err(|source| Error::Map {
            pe,
            step: ctx.step,
            index,
            source,
        })?;
    }
    Ok(out)
}

pub(crate) struct ReduceOutput {
    pub records: Vec<Record>,
    pub aggregate: u64,
    pub calls: u64,
}

/// Arrival order is ascending source PE, then emission order; groups are
/// visited in key order.
pub(crate) fn reduce_messages(
    job: &dyn Job,
    ctx: StepCtx,
    pe: PeId,
    mut inbox: Vec<Message>,
) -> Result<ReduceOutput> {
    inbox.sort_by_key(|m| m.src);
    let mut flat: Vec<Record> = inbox.into_iter().flat_map(|m| m.payload).collect();
    flat.sort_by(|a, b| a.key.cmp(&b.key));
    let mut out = ReduceOutput {
        records: Vec::new(),
        aggregate: 0,
        calls: 0,
    };
    for group in flat.chunk_by(|a, b| a.key == b.key) {
        let key = &group[0].key;
        let values: Vec<&[u8]> = group.iter().map(|r| r.value.as_slice()).collect();
        out.aggregate += job
            .reduce(ctx, key, &values, &mut out.records)
            .map_err(|source| Error::Reduce {
                pe,
                step: ctx.step,
                key: key.clone(),
                source,
            })?;
        out.calls += 1;
    }
    Ok(out)
}

#[derive(Debug)]
pub struct JobOutput {
    pub outputs: Vec<(PeId, Vec<Record>)>,
    pub metrics: Metrics,
    pub ledger: Option<LedgerReport>,
    pub history: Vec<StepSummary>,
    /// Failure events whose step was never reached.
    pub unfired: Vec<FailureEvent>,
}

impl JobOutput {
    /// All output records across PEs in canonical order.
    pub fn sorted_records(&self) -> Vec<Record> {
        let mut all: Vec<Record> = self
            .outputs
            .iter()
            .flat_map(|(_, r)| r.iter().cloned())
            .collect();
        crate::record::sort_records(&mut all);
        all
    }

    pub fn steps(&self) -> u64 {
        self.history.len() as u64
    }
}

pub fn run_job(
    job: &dyn Job,
    source: &dyn Source,
    cfg: &EngineConfig,
    failures: &[FailureEvent],
) -> Result<JobOutput> {
    run_job_observed(job, source, cfg, failures, &mut |_, _| {})
}

/// Like [`run_job`], calling `observer` at each shuffle barrier and after
/// each completed step.
pub fn run_job_observed(
    job: &dyn Job,
    source: &dyn Source,
    cfg: &EngineConfig,
    failures: &[FailureEvent],
    observer: &mut dyn FnMut(Stage, &Cluster),
) -> Result<JobOutput> {
    crate::recovery::validate_plan(failures, cfg.pes)?;
    let mut cluster = Cluster::new(cfg)?;
    cluster.ingest(source);
    let mut history: Vec<StepSummary> = Vec::new();
    let mut pending = failures.iter().peekable();
    let mut step = StepId(1);
    while let Some(phase) = job.next_phase(&history) {
        if step.0 > job.max_steps() {
            return Err(Error::NonTermination {
                steps: job.max_steps(),
            });
        }
        let ctx = StepCtx { step, phase };
        cluster.begin_step(ctx);
        cluster.map_phase(job, ctx)?;
        cluster.shuffle(ctx)?;
        observer(Stage::Shuffled(step), &cluster);
        while let Some(event) = pending.next_if(|e| e.step == step) {
            cluster.recover(job, source, event)?;
        }
        let aggregate = cluster.reduce_phase(job, ctx)?;
        cluster.gc_logs(step);
        observer(Stage::Reduced(step), &cluster);
        history.push(StepSummary { ctx, aggregate });
        step = step.next();
    }
    let outputs = cluster.outputs();
    Ok(JobOutput {
        outputs,
        ledger: cluster.ledger.take().map(DeliveryLedger::finish),
        metrics: cluster.metrics,
        history,
        unfired: pending.cloned().collect(),
    })
}
