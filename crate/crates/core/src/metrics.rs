//! Communication-volume and recovery accounting.
//!
//! CSV schema (stable):
//!
//! ```text
//! step,phase,network_bytes,self_bytes,backup_bytes,records
//! ```
//!
//! One `shuffle` row per MapReduce step, followed by a `recovery` row for
//! every failure recovered at that step. On recovery rows `network_bytes`
//! counts recovered data moved between PEs, `self_bytes` recovered data that
//! stayed on its holder, `backup_bytes` everything backed up during recovery,
//! and `records` the reconstructed records delivered into survivors' inboxes.

use std::fmt::Write as _;

use crate::record::{PeId, StepId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepMetrics {
    pub step: StepId,
    pub recovery_point: bool,
    /// Bytes shuffled between distinct PEs.
    pub network_bytes: u64,
    /// Bytes of self-messages (messages within one failure group, or to
    /// oneself when no groups are configured).
    pub self_bytes: u64,
    /// Bytes sent as backup shares.
    pub backup_bytes: u64,
    /// Records shuffled, including self-messages.
    pub records: u64,
    /// Bytes shuffled, including self-messages.
    pub shuffled_bytes: u64,
    pub map_calls: u64,
    pub reduce_calls: u64,
    /// Backup bytes received, indexed by initial PE id.
    pub backup_received: Vec<u64>,
}

impl StepMetrics {
    pub fn new(step: StepId, recovery_point: bool, p_initial: usize) -> Self {
        StepMetrics {
            step,
            recovery_point,
            network_bytes: 0,
            self_bytes: 0,
            backup_bytes: 0,
            records: 0,
            shuffled_bytes: 0,
            map_calls: 0,
            reduce_calls: 0,
            backup_received: vec![0; p_initial],
        }
    }

    pub fn max_backup_received(&self) -> u64 {
        self.backup_received.iter().copied().max().unwrap_or(0)
    }
}

/// Structured record of one recovery.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecoveryEvent {
    pub step: StepId,
    pub failed: Vec<PeId>,
    pub recovery_point: StepId,
    pub from_input: bool,
    pub replayed_steps: u64,
    pub network_bytes: u64,
    pub self_bytes: u64,
    pub backup_bytes: u64,
    pub records_delivered: u64,
    pub records_recomputed: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Metrics {
    pub steps: Vec<StepMetrics>,
    pub recoveries: Vec<RecoveryEvent>,
    /// Largest single record observed in any shuffle.
    pub max_record_bytes: u64,
    pub input_bytes: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Totals {
    pub network_bytes: u64,
    pub self_bytes: u64,
    pub backup_bytes: u64,
    pub records: u64,
    pub shuffled_bytes: u64,
    pub map_calls: u64,
    pub reduce_calls: u64,
}

impl Metrics {
    pub fn totals(&self) -> Totals {
        self.steps.iter().fold(Totals::default(), |mut t, s| {
            t.network_bytes += s.network_bytes;
            t.self_bytes += s.self_bytes;
            t.backup_bytes += s.backup_bytes;
            t.records += s.records;
            t.shuffled_bytes += s.shuffled_bytes;
            t.map_calls += s.map_calls;
            t.reduce_calls += s.reduce_calls;
            t
        })
    }

    /// Backup volume relative to network volume over the whole job.
    pub fn relative_overhead(&self) -> f64 {
        let t = self.totals();
        if t.network_bytes == 0 {
            return 0.0;
        }
        t.backup_bytes as f64 / t.network_bytes as f64
    }

    pub fn step(&self, step: StepId) -> Option<&StepMetrics> {
        self.steps.iter().find(|s| s.step == step)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,phase,network_bytes,self_bytes,backup_bytes,records\n");
        for s in &self.steps {
            let _ = writeln!(
                out,
                "{},shuffle,{},{},{},{}",
                s.step.0, s.network_bytes, s.self_bytes, s.backup_bytes, s.records
            );
            for r in self.recoveries.iter().filter(|r| r.step == s.step) {
                let _ = writeln!(
                    out,
                    "{},recovery,{},{},{},{}",
                    r.step.0, r.network_bytes, r.self_bytes, r.backup_bytes, r.records_delivered
                );
            }
        }
        out
    }
}
