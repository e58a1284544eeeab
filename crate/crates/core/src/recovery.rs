//! Recovery of failed PEs from message logs and self-message backups.
//!
//! A failure at step `t` is detected at the shuffle barrier of `t`, after all
//! messages of `t` have been delivered. Let `r` be the last recovery point at
//! or before `t`. Recovery reconstructs the inbox the failed PEs held at `r`
//! (survivors' logs plus backup shares, or regenerated input when `r` is 0),
//! replays Reduce/Map for steps `r..t` on the new owners of the failed ranges,
//! and finally delivers the reconstructed step-`t` inbox as if the failed PEs'
//! ranges had belonged to the survivors all along.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::engine::{map_records, reduce_messages, Cluster, ExchangeStats, Job, Source, StepCtx};
use crate::error::{Error, Result};
use crate::ledger::Generation;
use crate::metrics::RecoveryEvent;
use crate::partition::{backup_targets, share_of, BackupMode, PartitionMap};
use crate::record::{Message, MessageKind, PeId, Record, StepId};

/// PEs that fail together at the shuffle barrier of `step`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FailureEvent {
    pub step: StepId,
    pub failed: BTreeSet<PeId>,
}

impl FailureEvent {
    pub fn new(step: u64, failed: impl IntoIterator<Item = u32>) -> Self {
        FailureEvent {
            step: StepId(step),
            failed: failed.into_iter().map(PeId).collect(),
        }
    }
}

/// Checks that events are strictly ordered by step, start at step 1 and name
/// existing PEs. An event with an empty set is a no-op.
pub fn validate_plan(events: &[FailureEvent], p: usize) -> Result<()> {
    let mut prev = StepId::INGEST;
    for e in events {
        if e.step.0 == 0 {
            return Err(Error::FailurePlan(
                "failures can only be injected at step 1 or later".into(),
            ));
        }
        if e.step <= prev {
            return Err(Error::FailurePlan(format!(
                "failure events must be strictly ordered by step ({} after {})",
                e.step, prev
            )));
        }
        if let Some(pe) = e.failed.iter().find(|pe| pe.index() >= p) {
            return Err(Error::FailurePlan(format!("{pe} does not exist (p = {p})")));
        }
        prev = e.step;
    }
    Ok(())
}

/// Records awaiting delivery, keyed by the PE currently holding them.
type Held = BTreeMap<PeId, Vec<Record>>;

impl Cluster {
    /// Recovers from the failure of `event.failed` at the barrier of
    /// `event.step`. On return the survivors own the failed ranges and their
    /// inboxes hold exactly what the failed PEs would have reduced.
    pub fn recover(
        &mut self,
        job: &dyn Job,
        source: &dyn Source,
        event: &FailureEvent,
    ) -> Result<()> {
        let t = event.step;
        let failed = &event.failed;
        if failed.is_empty() {
            return Ok(());
        }
        let r = self.check_recoverable(source, event)?;

        for f in failed {
            let pe = &mut self.pes[f.index()];
            pe.alive = false;
            pe.current.clear();
            pe.inbox.clear();
            pe.sent_log.clear();
            pe.backup_store.clear();
        }

        let new_pm = self.shrunk_map(failed)?;
        if let Some(ledger) = &mut self.ledger {
            ledger.void(failed, StepId(r.0.max(1)), t);
        }

        let mut rec = RecoveryEvent {
            step: t,
            failed: failed.iter().copied().collect(),
            recovery_point: r,
            from_input: r == StepId::INGEST,
            replayed_steps: 0,
            network_bytes: 0,
            self_bytes: 0,
            backup_bytes: 0,
            records_delivered: 0,
            records_recomputed: 0,
        };

        let (mut s, mut held) = if r == StepId::INGEST {
            (
                StepId(1),
                self.regenerate_first_inbox(job, source, failed, &new_pm, &mut rec)?,
            )
        } else {
            (r, self.inbox_at_recovery_point(r, failed))
        };

        while s < t {
            held = self.replay_step(job, s, held, failed, &new_pm, &mut rec)?;
            s = s.next();
        }

        self.pm = new_pm;
        let mut backup_stats = ExchangeStats::default();
        if !self.ft.backs_up(t) {
            self.promote(t, failed, &mut backup_stats);
        }
        let sends: Vec<(PeId, Vec<Record>)> = held.into_iter().collect();
        let stats = self.exchange(t, sends, true, false, Generation::Recovery);
        absorb(&mut rec, &stats);
        rec.records_delivered = stats.records;

        self.adopt_orphans(t, failed, &mut backup_stats);
        self.rereplicate(t, failed, &mut backup_stats);
        rec.backup_bytes += backup_stats.backup_bytes;
        self.forget(failed);
        self.last_failure = Some(t);
        log::debug!("recovered {:?} at {t} from {r}", rec.failed);
        self.metrics.recoveries.push(rec);
        Ok(())
    }

    /// Validates the event and returns the recovery point to restart from.
    fn check_recoverable(&self, source: &dyn Source, event: &FailureEvent) -> Result<StepId> {
        let t = event.step;
        let failed = &event.failed;
        let unrecoverable = |reason: String| Error::Unrecoverable {
            step: t,
            failed: failed.iter().copied().collect(),
            reason,
        };
        if let Some(dead) = failed.iter().find(|f| !self.pes[f.index()].alive) {
            return Err(Error::FailurePlan(format!("{dead} already failed")));
        }
        if self.live().iter().all(|pe| failed.contains(pe)) {
            return Err(unrecoverable("no PE survives".into()));
        }
        if !self.ft.logging() {
            return Err(unrecoverable("message logging is disabled".into()));
        }
        let r = self.last_recovery_point(t);
        if let Some(prev) = self.last_failure {
            if r < prev {
                return Err(unrecoverable(format!(
                    "logs needed to replay from {r} were lost in the failure at {prev}"
                )));
            }
        }
        if r == StepId::INGEST {
            if !source.replayable() {
                return Err(unrecoverable("input cannot be regenerated".into()));
            }
            return Ok(r);
        }
        let first = *failed.first().expect("validated non-empty");
        if failed.iter().any(|&f| !self.plan.same_unit(first, f)) {
            return Err(unrecoverable(
                "simultaneous failure spans more than one failure unit".into(),
            ));
        }
        if self
            .unprotected
            .get(&r)
            .is_some_and(|u| failed.iter().any(|f| u.contains(f)))
        {
            return Err(unrecoverable(format!(
                "self-messages at {r} have no backup"
            )));
        }
        let lost_share = self.manifest(r).iter().find(|s| {
            failed.contains(&s.origin)
                && failed.contains(&s.dest)
                && (failed.contains(&s.holder) || !self.pes[s.holder.index()].alive)
        });
        if let Some(s) = lost_share {
            return Err(unrecoverable(format!(
                "backup share {}/{} of {}'s self-message at {r} was held by failed {}",
                s.share, s.of, s.origin, s.holder
            )));
        }
        Ok(r)
    }

    fn shrunk_map(&self, failed: &BTreeSet<PeId>) -> Result<PartitionMap> {
        if !self.ft.single_recoverer {
            return self.pm.shrink(failed);
        }
        let survivors: Vec<PeId> = self.live();
        let first = *failed.first().expect("validated non-empty");
        let recipient = backup_targets(
            first,
            &survivors,
            BackupMode::Single,
            self.plan.groups.as_ref(),
            self.p_initial(),
        )
        .ok()
        .and_then(|t| t.first().copied())
        .unwrap_or(survivors[0]);
        self.pm.shrink_onto(failed, recipient)
    }

    /// Survivors' logged messages to the failed PEs at `step`, held by their
    /// senders.
    fn logged_to(&self, step: StepId, failed: &BTreeSet<PeId>, held: &mut Held) {
        for pe in self.pes.iter().filter(|pe| pe.alive) {
            let Some(by_dst) = pe.sent_log.get(&step) else {
                continue;
            };
            for f in failed {
                for m in by_dst.get(f).into_iter().flatten() {
                    held.entry(pe.id)
                        .or_default()
                        .extend(m.payload.iter().cloned());
                }
            }
        }
    }

    /// The failed PEs' inbox at recovery point `r`: logged messages from
    /// survivors plus backup shares of the self-messages among the failed.
    fn inbox_at_recovery_point(&self, r: StepId, failed: &BTreeSet<PeId>) -> Held {
        let mut held = Held::new();
        self.logged_to(r, failed, &mut held);
        for pe in self.pes.iter().filter(|pe| pe.alive) {
            for m in pe.backup_store.get(&r).into_iter().flatten() {
                if let MessageKind::BackupShare { origin, dest, .. } = m.kind {
                    if failed.contains(&origin) && failed.contains(&dest) {
                        held.entry(pe.id)
                            .or_default()
                            .extend(m.payload.iter().cloned());
                    }
                }
            }
        }
        held
    }

    /// Rebuilds the failed PEs' step-1 inbox from regenerated input.
    fn regenerate_first_inbox(
        &self,
        job: &dyn Job,
        source: &dyn Source,
        failed: &BTreeSet<PeId>,
        new_pm: &PartitionMap,
        rec: &mut RecoveryEvent,
    ) -> Result<Held> {
        let p = self.p_initial();
        let mut input = Held::new();
        for &f in failed {
            for r in source.generate(f, p) {
                input
                    .entry(new_pm.owner_of_key(&r.key))
                    .or_default()
                    .push(r);
            }
        }
        let ctx = StepCtx {
            step: StepId(1),
            phase: self.phases[&StepId(1)],
        };
        let mapped = input
            .into_par_iter()
            .map(|(holder, recs)| Ok((holder, map_records(job, ctx, holder, &recs)?)))
            .collect::<Result<Vec<_>>>()?;
        let old_pm = &self.pm_at[&StepId(1)];
        let mut held = Held::new();
        for (holder, out) in mapped {
            rec.records_recomputed += out.len() as u64;
            let keep: Vec<Record> = out
                .into_iter()
                .filter(|r| failed.contains(&old_pm.owner_of_key(&r.key)))
                .collect();
            if !keep.is_empty() {
                held.insert(holder, keep);
            }
        }
        self.logged_to(StepId(1), failed, &mut held);
        Ok(held)
    }

    /// Delivers the reconstructed step-`s` inbox to the new owners, replays
    /// Reduce of `s` and Map of `s + 1`, and returns the failed PEs'
    /// reconstructed step-`s + 1` inbox.
    fn replay_step(
        &mut self,
        job: &dyn Job,
        s: StepId,
        held: Held,
        failed: &BTreeSet<PeId>,
        new_pm: &PartitionMap,
        rec: &mut RecoveryEvent,
    ) -> Result<Held> {
        let mut per_owner: BTreeMap<PeId, Vec<Message>> = BTreeMap::new();
        for (holder, recs) in held {
            for (owner, part) in crate::partition::route(new_pm, &recs) {
                let m = Message::shuffle(holder, owner, s, part);
                if holder == owner {
                    rec.self_bytes += m.bytes();
                } else {
                    rec.network_bytes += m.bytes();
                }
                if let Some(ledger) = &mut self.ledger {
                    for r in &m.payload {
                        ledger.record(s, owner, r, Generation::Recovery);
                    }
                }
                per_owner.entry(owner).or_default().push(m);
            }
        }
        let reduce_ctx = StepCtx {
            step: s,
            phase: self.phases[&s],
        };
        let map_ctx = StepCtx {
            step: s.next(),
            phase: self.phases[&s.next()],
        };
        let outputs = per_owner
            .into_par_iter()
            .map(|(owner, msgs)| {
                let reduced = reduce_messages(job, reduce_ctx, owner, msgs)?;
                Ok((owner, map_records(job, map_ctx, owner, &reduced.records)?))
            })
            .collect::<Result<Vec<_>>>()?;
        let next_pm = &self.pm_at[&s.next()];
        let mut next = Held::new();
        for (owner, out) in outputs {
            rec.records_recomputed += out.len() as u64;
            let keep: Vec<Record> = out
                .into_iter()
                .filter(|r| failed.contains(&next_pm.owner_of_key(&r.key)))
                .collect();
            if !keep.is_empty() {
                next.insert(owner, keep);
            }
        }
        self.logged_to(s.next(), failed, &mut next);
        rec.replayed_steps += 1;
        Ok(next)
    }

    /// Makes failure step `t` a recovery point by backing up the survivors'
    /// self-messages of `t`, which are still intact at the barrier. A later
    /// failure then restarts from `t` instead of from a recovery point whose
    /// data partly died with the failed PEs.
    fn promote(&mut self, t: StepId, failed: &BTreeSet<PeId>, stats: &mut ExchangeStats) {
        let live = self.pm.live();
        for &src in &live {
            let selfs: Vec<(PeId, u32, Vec<Record>)> = self.pes[src.index()]
                .sent_log
                .get(&t)
                .into_iter()
                .flatten()
                .filter(|(dst, _)| !failed.contains(dst) && self.plan.same_unit(src, **dst))
                .flat_map(|(&dst, msgs)| {
                    msgs.iter()
                        .enumerate()
                        .map(move |(i, m)| (dst, i as u32, m.payload.clone()))
                })
                .collect();
            for (dst, idx, payload) in selfs {
                self.back_up(t, src, dst, idx, &payload, &live, stats);
            }
        }
        self.promoted.insert(t);
    }

    /// Messages the failed PEs sent to survivors at recovery point `t` exist
    /// only in the survivors' inboxes now. Each survivor takes them over as
    /// its own self-message so that its next failure can be recovered.
    fn adopt_orphans(&mut self, t: StepId, failed: &BTreeSet<PeId>, stats: &mut ExchangeStats) {
        let live = self.pm.live();
        for &d in &live {
            let orphans: Vec<Record> = self.pes[d.index()]
                .inbox
                .iter()
                .filter(|m| failed.contains(&m.src))
                .flat_map(|m| m.payload.iter().cloned())
                .collect();
            if orphans.is_empty() {
                continue;
            }
            let log = self.pes[d.index()]
                .sent_log
                .entry(t)
                .or_default()
                .entry(d)
                .or_default();
            log.push(Message::shuffle(d, d, t, orphans.clone()));
            let idx = (log.len() - 1) as u32;
            self.back_up(t, d, d, idx, &orphans, &live, stats);
        }
    }

    /// Re-creates backup shares at `t` that were held by failed PEs, from the
    /// origin's own log.
    fn rereplicate(&mut self, t: StepId, failed: &BTreeSet<PeId>, stats: &mut ExchangeStats) {
        let live = self.pm.live();
        let p = self.p_initial();
        let Some(mut shares) = self.manifest.remove(&t) else {
            return;
        };
        for share in shares.iter_mut() {
            if !failed.contains(&share.holder)
                || failed.contains(&share.origin)
                || failed.contains(&share.dest)
            {
                continue;
            }
            let candidate = (1..=p)
                .map(|k| PeId(((share.holder.index() + k) % p) as u32))
                .find(|&c| live.contains(&c) && !self.plan.same_unit(c, share.origin));
            let Some(holder) = candidate else {
                self.unprotected.entry(t).or_default().insert(share.origin);
                continue;
            };
            let source =
                &self.pes[share.origin.index()].sent_log[&t][&share.dest][share.msg as usize];
            let payload = share_of(&source.payload, share.share as usize, share.of as usize);
            let m = Message {
                src: share.origin,
                dst: holder,
                step: t,
                kind: MessageKind::BackupShare {
                    origin: share.origin,
                    dest: share.dest,
                    msg: share.msg,
                    share: share.share,
                    of: share.of,
                },
                payload,
            };
            stats.backup_bytes += m.bytes();
            self.pes[holder.index()]
                .backup_store
                .entry(t)
                .or_default()
                .push(m);
            share.holder = holder;
        }
        self.manifest.insert(t, shares);
    }

    /// Drops logs, backups and metadata that refer to the failed PEs.
    fn forget(&mut self, failed: &BTreeSet<PeId>) {
        for pe in self.pes.iter_mut().filter(|pe| pe.alive) {
            for by_dst in pe.sent_log.values_mut() {
                by_dst.retain(|dst, _| !failed.contains(dst));
            }
            for msgs in pe.backup_store.values_mut() {
                msgs.retain(|m| match m.kind {
                    MessageKind::BackupShare { origin, dest, .. } => {
                        !failed.contains(&origin) && !failed.contains(&dest)
                    }
                    MessageKind::Shuffle => true,
                });
            }
        }
        for shares in self.manifest.values_mut() {
            shares.retain(|s| !failed.contains(&s.origin) && !failed.contains(&s.dest));
        }
        for origins in self.unprotected.values_mut() {
            origins.retain(|o| !failed.contains(o));
        }
    }
}

fn absorb(rec: &mut RecoveryEvent, stats: &ExchangeStats) {
    rec.network_bytes += stats.network_bytes;
    rec.self_bytes += stats.shuffled_bytes - stats.network_bytes;
    rec.backup_bytes += stats.backup_bytes;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::wordcount::{TextSource, WordCount};
    use crate::engine::{run_job, run_job_observed, EngineConfig, FtConfig, RecoveryPoints, Stage};
    use crate::partition::FailureGroups;
    use crate::record::{MessageKind, Record};

    fn text() -> TextSource {
        TextSource::new(11, 300, 30)
    }

    fn unrecoverable(err: Error) -> String {
        match err {
            Error::Unrecoverable { reason, .. } => reason,
            other => panic!("expected unrecoverable, got {other}"),
        }
    }

    fn grouped(p: usize, size: usize) -> EngineConfig {
        let ft = FtConfig {
            groups: Some(FailureGroups::consecutive(p, size).unwrap()),
            ..Default::default()
        };
        EngineConfig::new(p, ft)
    }

    #[test]
    fn plan_validation() {
        assert!(validate_plan(&[FailureEvent::new(1, [0]), FailureEvent::new(2, [1])], 4).is_ok());
        assert!(validate_plan(&[FailureEvent::new(0, [0])], 4).is_err());
        assert!(validate_plan(&[FailureEvent::new(2, [0]), FailureEvent::new(2, [1])], 4).is_err());
        assert!(validate_plan(&[FailureEvent::new(1, [4])], 4).is_err());
    }

    #[test]
    fn logging_off_is_unrecoverable() {
        let cfg = EngineConfig::new(4, FtConfig::off());
        let err = run_job(&WordCount, &text(), &cfg, &[FailureEvent::new(1, [2])]).unwrap_err();
        assert!(unrecoverable(err).contains("logging"));
    }

    #[test]
    fn failing_all_pes_is_unrecoverable() {
        let cfg = EngineConfig::new(2, FtConfig::default());
        let err = run_job(&WordCount, &text(), &cfg, &[FailureEvent::new(1, [0, 1])]).unwrap_err();
        assert!(unrecoverable(err).contains("survives"));
    }

    #[test]
    fn pe_failing_twice_is_a_plan_error() {
        let job = crate::benchmarks::IdentityJob { steps: 3 };
        let cfg = EngineConfig::new(3, FtConfig::default());
        let plan = [FailureEvent::new(1, [1]), FailureEvent::new(2, [1])];
        let err = run_job(&job, &text(), &cfg, &plan).unwrap_err();
        assert!(matches!(err, Error::FailurePlan(_)), "{err}");
    }

    #[test]
    fn simultaneous_failure_across_units_is_unrecoverable() {
        let job = crate::benchmarks::IdentityJob { steps: 2 };
        let cfg = EngineConfig::new(4, FtConfig::default());
        let err = run_job(&job, &text(), &cfg, &[FailureEvent::new(2, [1, 2])]).unwrap_err();
        assert!(unrecoverable(err).contains("failure unit"));
    }

    #[test]
    fn empty_failure_set_changes_nothing() {
        let cfg = EngineConfig::new(3, FtConfig::default());
        let plain = run_job(&WordCount, &text(), &cfg, &[]).unwrap();
        let noop = run_job(&WordCount, &text(), &cfg, &[FailureEvent::new(1, [])]).unwrap();
        assert_eq!(plain.outputs, noop.outputs);
        assert_eq!(plain.metrics, noop.metrics);
    }

    struct Once(TextSource);

    impl Source for Once {
        fn generate(&self, pe: PeId, p: usize) -> Vec<crate::record::Record> {
            self.0.generate(pe, p)
        }
        fn replayable(&self) -> bool {
            false
        }
    }

    #[test]
    fn non_replayable_input_needs_a_logged_recovery_point() {
        let ft = FtConfig {
            recovery_points: RecoveryPoints::InputOnly,
            ..Default::default()
        };
        let cfg = EngineConfig::new(3, ft);
        let err = run_job(
            &WordCount,
            &Once(text()),
            &cfg,
            &[FailureEvent::new(1, [0])],
        )
        .unwrap_err();
        assert!(unrecoverable(err).contains("regenerated"));
        // With backups at every step the input is never needed.
        let every = EngineConfig::new(3, FtConfig::default());
        assert!(run_job(
            &WordCount,
            &Once(text()),
            &every,
            &[FailureEvent::new(1, [0])]
        )
        .is_ok());
    }

    #[test]
    fn ranges_are_conserved_after_recovery() {
        let job = crate::benchmarks::IdentityJob { steps: 3 };
        for single in [false, true] {
            let ft = FtConfig {
                single_recoverer: single,
                ..Default::default()
            };
            let cfg = EngineConfig::new(5, ft);
            let plan = [FailureEvent::new(1, [3]), FailureEvent::new(2, [0])];
            run_job_observed(&job, &text(), &cfg, &plan, &mut |stage, c| {
                let Stage::Reduced(t) = stage else { return };
                let pm = c.partition_map();
                pm.validate().unwrap();
                let total: u128 = pm.ranges().iter().map(|r| r.len()).sum();
                assert_eq!(total, 1u128 << 64);
                assert_eq!(pm.is_live(PeId(3)), t.0 < 1);
                assert_eq!(pm.is_live(PeId(0)), t.0 < 2);
                if t.0 >= 1 {
                    assert_eq!(pm.ranges_of(PeId(3)).count(), 0);
                }
            })
            .unwrap();
        }
    }

    #[test]
    fn group_backups_leave_the_group() {
        let cfg = grouped(4, 2);
        let mut shares = 0;
        run_job_observed(&WordCount, &text(), &cfg, &[], &mut |stage, c| {
            let Stage::Shuffled(t) = stage else { return };
            for pe in c.pes() {
                for m in pe.backup_store.get(&t).into_iter().flatten() {
                    let MessageKind::BackupShare { origin, dest, .. } = m.kind else {
                        panic!("non-share in backup store")
                    };
                    assert_eq!(
                        origin.0 / 2,
                        dest.0 / 2,
                        "only in-group messages are backed up"
                    );
                    assert_ne!(pe.id.0 / 2, origin.0 / 2, "share held inside its own group");
                    shares += 1;
                }
            }
            // Messages 2 -> 3 are self-messages of group {2, 3}: backed up only on {0, 1}.
            let holders: BTreeSet<PeId> = c
                .manifest(t)
                .iter()
                .filter(|s| s.origin == PeId(2) && s.dest == PeId(3))
                .map(|s| s.holder)
                .collect();
            assert!(holders.is_subset(&[PeId(0), PeId(1)].into()));
        })
        .unwrap();
        assert!(shares > 0);
    }

    #[test]
    fn whole_group_failure_recovers() {
        let cfg = grouped(6, 2);
        let plain = run_job(&WordCount, &text(), &cfg, &[]).unwrap();
        let failed = run_job(
            &WordCount,
            &text(),
            &cfg.clone().with_ledger(),
            &[FailureEvent::new(1, [2, 3])],
        )
        .unwrap();
        assert_eq!(plain.sorted_records(), failed.sorted_records());
        assert!(failed.ledger.unwrap().exactly_once());
        let rec = &failed.metrics.recoveries[0];
        assert_eq!(rec.failed, vec![PeId(2), PeId(3)]);
        assert_eq!(rec.recovery_point, StepId(1));
        assert!(!rec.from_input);
    }

    #[test]
    fn reconstructed_inbox_matches_actual() {
        use crate::engine::{Cluster, Job, StepCtx};
        for (cfg, failed) in [
            (EngineConfig::new(4, FtConfig::default()), vec![2]),
            (grouped(6, 2), vec![2, 3]),
        ] {
            let failed: BTreeSet<PeId> = failed.into_iter().map(PeId).collect();
            let mut c = Cluster::new(&cfg).unwrap();
            c.ingest(&text());
            let ctx = StepCtx {
                step: StepId(1),
                phase: 0,
            };
            c.begin_step(ctx);
            c.map_phase(&WordCount as &dyn Job, ctx).unwrap();
            c.shuffle(ctx).unwrap();
            let mut actual: Vec<Record> = failed
                .iter()
                .flat_map(|f| c.pe(*f).inbox.iter().flat_map(|m| m.payload.clone()))
                .collect();
            for f in &failed {
                c.pes[f.index()].alive = false;
            }
            let mut rebuilt: Vec<Record> = c
                .inbox_at_recovery_point(StepId(1), &failed)
                .into_values()
                .flatten()
                .collect();
            crate::record::sort_records(&mut actual);
            crate::record::sort_records(&mut rebuilt);
            assert!(!actual.is_empty());
            assert_eq!(actual, rebuilt);
        }
    }

    #[test]
    fn input_only_recovery_replays_from_input() {
        let ft = FtConfig {
            recovery_points: RecoveryPoints::InputOnly,
            ..Default::default()
        };
        let cfg = EngineConfig::new(3, ft).with_ledger();
        let job = crate::benchmarks::IdentityJob { steps: 3 };
        let out = run_job(&job, &text(), &cfg, &[FailureEvent::new(3, [1])]).unwrap();
        let rec = &out.metrics.recoveries[0];
        assert!(rec.from_input);
        assert_eq!(rec.recovery_point, StepId::INGEST);
        assert_eq!(rec.replayed_steps, 2);
        assert!(out.ledger.unwrap().exactly_once());
        assert_eq!(out.metrics.totals().backup_bytes, 0);
    }
}
