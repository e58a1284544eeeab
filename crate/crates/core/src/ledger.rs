//! Delivery ledger: a test instrument that checks every logical record
//! delivery happens exactly once across normal execution and recovery.
//!
//! Each inbox delivery is recorded as a fingerprint under `(step, dst)`. When
//! PEs fail, their deliveries inside the recovery window are voided, since
//! their state is lost. Recovery then re-delivers a reconstruction of exactly
//! that data. For every step the multiset of voided fingerprints must equal
//! the multiset of recovery fingerprints: a surplus means something was
//! delivered twice, a deficit means something went missing.

use std::collections::{BTreeMap, BTreeSet};

use crate::hash::{fnv1a, fnv1a_continue, splitmix64_mix};
use crate::record::{PeId, Record, StepId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generation {
    Original,
    Recovery,
}

/// 64-bit fingerprint of a record delivered at `step`.
pub fn fingerprint(step: StepId, record: &Record) -> u64 {
    let mut h = fnv1a(&step.0.to_le_bytes());
    for part in [
        &(record.key.len() as u64).to_le_bytes()[..],
        &record.key,
        &record.value,
    ] {
        h = fnv1a_continue(h, part);
    }
    splitmix64_mix(h)
}

#[derive(Debug, Default, Clone)]
struct StepEntries {
    live: BTreeMap<PeId, Vec<u64>>,
    voided: Vec<u64>,
    recovered: Vec<u64>,
}

/// Order-independent digest of the deliveries that stayed in effect at a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepDigest {
    pub count: u64,
    pub sum: u64,
    pub xor_mixed: u64,
}

impl StepDigest {
    fn add(&mut self, fp: u64) {
        self.count += 1;
        self.sum = self.sum.wrapping_add(fp);
        self.xor_mixed ^= splitmix64_mix(fp);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LedgerMismatch {
    pub step: StepId,
    /// Voided deliveries never re-delivered by recovery.
    pub missing: u64,
    /// Recovery deliveries without a voided counterpart.
    pub duplicated: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LedgerReport {
    pub deliveries: u64,
    pub recovery_deliveries: u64,
    pub voided: u64,
    pub mismatches: Vec<LedgerMismatch>,
    /// Digest of effective deliveries per step, comparable across runs.
    pub digests: BTreeMap<StepId, StepDigest>,
}

impl LedgerReport {
    pub fn exactly_once(&self) -> bool {
        self.mismatches.is_empty()
    }
}

#[derive(Debug, Default, Clone)]
pub struct DeliveryLedger {
    open: BTreeMap<StepId, StepEntries>,
    report: LedgerReport,
}

impl DeliveryLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, step: StepId, dst: PeId, record: &Record, generation: Generation) {
        let fp = fingerprint(step, record);
        let entries = self.open.entry(step).or_default();
        entries.live.entry(dst).or_default().push(fp);
        self.report.deliveries += 1;
        if generation == Generation::Recovery {
            entries.recovered.push(fp);
            self.report.recovery_deliveries += 1;
        }
    }

    /// Voids all deliveries to `failed` at steps in `[from, to]`.
    pub fn void(&mut self, failed: &BTreeSet<PeId>, from: StepId, to: StepId) {
        for (_, entries) in self.open.range_mut(from..=to) {
            for pe in failed {
                if let Some(fps) = entries.live.remove(pe) {
                    self.report.voided += fps.len() as u64;
                    entries.voided.extend(fps);
                }
            }
        }
    }

    /// Finalizes every step strictly before `step`; those can no longer be
    /// affected by recovery.
    pub fn seal_before(&mut self, step: StepId) {
        let keep = self.open.split_off(&step);
        let sealed = std::mem::replace(&mut self.open, keep);
        for (s, entries) in sealed {
            self.seal_step(s, entries);
        }
    }

    fn seal_step(&mut self, step: StepId, mut entries: StepEntries) {
        entries.voided.sort_unstable();
        entries.recovered.sort_unstable();
        let (missing, duplicated) = multiset_difference(&entries.voided, &entries.recovered);
        if missing > 0 || duplicated > 0 {
            self.report.mismatches.push(LedgerMismatch {
                step,
                missing,
                duplicated,
            });
        }
        let mut all: Vec<u64> = entries.live.into_values().flatten().collect();
        all.sort_unstable();
        let digest = self.report.digests.entry(step).or_default();
        for fp in all {
            digest.add(fp);
        }
    }

    pub fn finish(mut self) -> LedgerReport {
        self.seal_before(StepId(u64::MAX));
        self.report
    }
}

/// Counts of elements only in `a` and only in `b` (both sorted).
fn multiset_difference(a: &[u64], b: &[u64]) -> (u64, u64) {
    let (mut i, mut j) = (0, 0);
    let (mut only_a, mut only_b) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
            std::cmp::Ordering::Less => {
                only_a += 1;
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                only_b += 1;
                j += 1;
            }
        }
    }
    only_a += (a.len() - i) as u64;
    only_b += (b.len() - j) as u64;
    (only_a, only_b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(k: &str) -> Record {
        Record::new(k, "v")
    }

    #[test]
    fn fault_free_is_exactly_once() {
        let mut l = DeliveryLedger::new();
        l.record(StepId(1), PeId(0), &r("a"), Generation::Original);
        l.record(StepId(1), PeId(1), &r("b"), Generation::Original);
        let rep = l.finish();
        assert!(rep.exactly_once());
        assert_eq!(rep.deliveries, 2);
        assert_eq!(rep.digests[&StepId(1)].count, 2);
    }

    #[test]
    fn matching_recovery_balances() {
        let mut l = DeliveryLedger::new();
        l.record(StepId(1), PeId(0), &r("a"), Generation::Original);
        l.record(StepId(1), PeId(1), &r("b"), Generation::Original);
        l.void(&[PeId(1)].into(), StepId(1), StepId(1));
        l.record(StepId(1), PeId(0), &r("b"), Generation::Recovery);
        let rep = l.finish();
        assert!(rep.exactly_once(), "{rep:?}");
        assert_eq!(rep.digests[&StepId(1)].count, 2);
    }

    #[test]
    fn duplicate_resend_detected() {
        let mut l = DeliveryLedger::new();
        l.record(StepId(2), PeId(1), &r("b"), Generation::Original);
        l.void(&[PeId(1)].into(), StepId(2), StepId(2));
        l.record(StepId(2), PeId(0), &r("b"), Generation::Recovery);
        l.record(StepId(2), PeId(0), &r("c"), Generation::Recovery);
        let rep = l.finish();
        assert_eq!(
            rep.mismatches,
            vec![LedgerMismatch {
                step: StepId(2),
                missing: 0,
                duplicated: 1
            }]
        );
    }

    #[test]
    fn missing_recovery_detected() {
        let mut l = DeliveryLedger::new();
        l.record(StepId(2), PeId(1), &r("b"), Generation::Original);
        l.record(StepId(2), PeId(1), &r("b"), Generation::Original);
        l.void(&[PeId(1)].into(), StepId(1), StepId(3));
        l.record(StepId(2), PeId(0), &r("b"), Generation::Recovery);
        let rep = l.finish();
        assert_eq!(rep.mismatches[0].missing, 1);
    }

    #[test]
    fn fingerprint_depends_on_step_and_content() {
        assert_ne!(
            fingerprint(StepId(1), &r("a")),
            fingerprint(StepId(2), &r("a"))
        );
        assert_ne!(
            fingerprint(StepId(1), &Record::new("ab", "c")),
            fingerprint(StepId(1), &Record::new("a", "bc"))
        );
    }
}
