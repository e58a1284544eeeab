//! Hash-range ownership, range shrinking after failures, and backup-target
//! assignment for self-messages.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::record::{PeId, Record};

pub use crate::hash::hash_key;

const HASH_SPACE: u128 = 1u128 << 64;

/// Half-open interval `[lo, hi)` of the 64-bit hash domain. `hi` may equal
/// 2^64 for the last range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashRange {
    pub owner: PeId,
    pub lo: u64,
    pub hi: u128,
}

impl HashRange {
    pub fn contains(&self, h: u64) -> bool {
        h >= self.lo && u128::from(h) < self.hi
    }

    pub fn len(&self) -> u128 {
        self.hi - u128::from(self.lo)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Assignment of the hash domain to live PEs. Ranges are kept sorted by
/// their lower bound.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionMap {
    ranges: Vec<HashRange>,
}

impl PartitionMap {
    /// PE `i` of `p` owns `[floor(i * 2^64 / p), floor((i + 1) * 2^64 / p))`.
    pub fn initial(p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::Partition("partition over zero PEs".into()));
        }
        let bound = |i: usize| (i as u128 * HASH_SPACE) / p as u128;
        let ranges = (0..p)
            .map(|i| HashRange {
                owner: PeId(i as u32),
                lo: bound(i) as u64,
                hi: bound(i + 1),
            })
            .collect();
        Ok(PartitionMap { ranges })
    }

    pub fn ranges(&self) -> &[HashRange] {
        &self.ranges
    }

    pub fn ranges_of(&self, pe: PeId) -> impl Iterator<Item = &HashRange> + '_ {
        self.ranges.iter().filter(move |r| r.owner == pe)
    }

    /// Live PEs in ascending order.
    pub fn live(&self) -> Vec<PeId> {
        self.ranges
            .iter()
            .map(|r| r.owner)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn is_live(&self, pe: PeId) -> bool {
        self.ranges.iter().any(|r| r.owner == pe)
    }

    pub fn owner_of(&self, h: u64) -> PeId {
        let idx = self.ranges.partition_point(|r| r.lo <= h);
        self.ranges[idx - 1].owner
    }

    pub fn owner_of_key(&self, key: &[u8]) -> PeId {
        self.owner_of(hash_key(key))
    }

    /// Splits every failed PE's ranges evenly among the survivors. Survivors
    /// keep their existing ranges.
    pub fn shrink(&self, failed: &BTreeSet<PeId>) -> Result<Self> {
        let survivors = self.survivors(failed)?;
        if failed.is_empty() {
            return Ok(self.clone());
        }
        let s = survivors.len() as u128;
        let mut ranges = Vec::with_capacity(self.ranges.len() + failed.len() * survivors.len());
        for r in &self.ranges {
            if !failed.contains(&r.owner) {
                ranges.push(*r);
                continue;
            }
            let len = r.len();
            for (k, &owner) in survivors.iter().enumerate() {
                let k = k as u128;
                let lo = u128::from(r.lo) + k * len / s;
                let hi = u128::from(r.lo) + (k + 1) * len / s;
                if lo < hi {
                    ranges.push(HashRange {
                        owner,
                        lo: lo as u64,
                        hi,
                    });
                }
            }
        }
        ranges.sort_by_key(|r| r.lo);
        Ok(PartitionMap { ranges })
    }

    /// Hands all ranges of the failed PEs to a single survivor.
    pub fn shrink_onto(&self, failed: &BTreeSet<PeId>, recipient: PeId) -> Result<Self> {
        let survivors = self.survivors(failed)?;
        if !survivors.contains(&recipient) {
            return Err(Error::Partition(format!("{recipient} is not a survivor")));
        }
        let ranges = self
            .ranges
            .iter()
            .map(|r| HashRange {
                owner: if failed.contains(&r.owner) {
                    recipient
                } else {
                    r.owner
                },
                ..*r
            })
            .collect();
        Ok(PartitionMap { ranges })
    }

    fn survivors(&self, failed: &BTreeSet<PeId>) -> Result<Vec<PeId>> {
        let live = self.live();
        if let Some(dead) = failed.iter().find(|f| !live.contains(f)) {
            return Err(Error::Partition(format!("{dead} owns no range")));
        }
        let survivors: Vec<PeId> = live.into_iter().filter(|p| !failed.contains(p)).collect();
        if survivors.is_empty() {
            return Err(Error::Partition("no surviving PE".into()));
        }
        Ok(survivors)
    }

    /// Checks disjointness, full coverage of `[0, 2^64)` and non-empty ranges.
    pub fn validate(&self) -> Result<()> {
        let mut next: u128 = 0;
        for r in &self.ranges {
            if u128::from(r.lo) != next {
                return Err(Error::Partition(format!(
                    "gap or overlap at {:#x} (expected {next:#x})",
                    r.lo
                )));
            }
            if r.is_empty() {
                return Err(Error::Partition(format!("empty range at {:#x}", r.lo)));
            }
            next = r.hi;
        }
        if next != HASH_SPACE {
            return Err(Error::Partition(format!("coverage ends at {next:#x}")));
        }
        Ok(())
    }
}

/// Static partition of the initial PEs into groups that may fail together.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FailureGroups {
    group_of: Vec<u32>,
}

impl FailureGroups {
    /// Consecutive blocks of `size` PEs.
    pub fn consecutive(p: usize, size: usize) -> Result<Self> {
        if size == 0 || !p.is_multiple_of(size) {
            return Err(Error::Config(format!(
                "group size {size} does not divide {p} PEs"
            )));
        }
        Ok(FailureGroups {
            group_of: (0..p).map(|i| (i / size) as u32).collect(),
        })
    }

    pub fn from_assignment(group_of: Vec<u32>) -> Self {
        FailureGroups { group_of }
    }

    pub fn group_of(&self, pe: PeId) -> u32 {
        self.group_of[pe.index()]
    }

    pub fn same_group(&self, a: PeId, b: PeId) -> bool {
        self.group_of(a) == self.group_of(b)
    }

    pub fn members(&self, group: u32) -> BTreeSet<PeId> {
        self.group_of
            .iter()
            .enumerate()
            .filter(|&(_, &g)| g == group)
            .map(|(i, _)| PeId(i as u32))
            .collect()
    }

    pub fn num_groups(&self) -> usize {
        self.group_of.iter().collect::<BTreeSet<_>>().len()
    }

    pub fn len(&self) -> usize {
        self.group_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.group_of.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BackupMode {
    /// Self-messages are split over all other live PEs.
    #[default]
    Split,
    /// Each PE backs up to one successor.
    Single,
    /// No logging and no backups.
    Off,
}

impl BackupMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BackupMode::Split => "split",
            BackupMode::Single => "single",
            BackupMode::Off => "off",
        }
    }
}

impl std::str::FromStr for BackupMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "split" => Ok(BackupMode::Split),
            "single" => Ok(BackupMode::Single),
            "off" => Ok(BackupMode::Off),
            other => Err(Error::Config(format!("unknown backup mode {other:?}"))),
        }
    }
}

/// Who backs up whose self-messages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackupPlan {
    pub mode: BackupMode,
    pub groups: Option<FailureGroups>,
    pub p_initial: usize,
}

impl BackupPlan {
    pub fn new(mode: BackupMode, p_initial: usize) -> Self {
        BackupPlan {
            mode,
            groups: None,
            p_initial,
        }
    }

    pub fn with_groups(mut self, groups: FailureGroups) -> Self {
        self.groups = Some(groups);
        self
    }

    /// Whether `a` and `b` are one logical PE for backup purposes.
    pub fn same_unit(&self, a: PeId, b: PeId) -> bool {
        match &self.groups {
            Some(g) => g.same_group(a, b),
            None => a == b,
        }
    }

    pub fn targets(&self, pe: PeId, live: &[PeId]) -> Result<Vec<PeId>> {
        backup_targets(pe, live, self.mode, self.groups.as_ref(), self.p_initial)
    }
}

/// Backup targets of `pe` among `live` (ascending). Split mode yields every
/// eligible live PE; single mode yields the next eligible PE after `pe`,
/// wrapping around.
pub fn backup_targets(
    pe: PeId,
    live: &[PeId],
    mode: BackupMode,
    groups: Option<&FailureGroups>,
    p_initial: usize,
) -> Result<Vec<PeId>> {
    let eligible = |c: PeId| c != pe && groups.is_none_or(|g| !g.same_group(pe, c));
    let targets: Vec<PeId> = match mode {
        BackupMode::Off => return Ok(Vec::new()),
        BackupMode::Split => live.iter().copied().filter(|&c| eligible(c)).collect(),
        BackupMode::Single => (1..p_initial)
            .map(|k| PeId(((pe.index() + k) % p_initial) as u32))
            .find(|c| live.contains(c) && eligible(*c))
            .into_iter()
            .collect(),
    };
    if targets.is_empty() {
        return Err(Error::Partition(format!(
            "{pe} has no possible backup target among {} live PEs",
            live.len()
        )));
    }
    Ok(targets)
}

/// Round-robin split by arrival index: record `j` goes to share `j % n`.
/// Every target receives a (possibly empty) share.
pub fn split_self_message<T: Clone>(records: &[T], targets: &[PeId]) -> Vec<(PeId, Vec<T>)> {
    let n = targets.len();
    targets
        .iter()
        .enumerate()
        .map(|(s, &t)| (t, share_of(records, s, n)))
        .collect()
}

/// Share `share` of an `of`-way round-robin split.
pub fn share_of<T: Clone>(records: &[T], share: usize, of: usize) -> Vec<T> {
    records
        .iter()
        .skip(share)
        .step_by(of.max(1))
        .cloned()
        .collect()
}

/// Routes records to their owners, preserving input order per owner.
pub fn route<'a>(
    pm: &PartitionMap,
    records: impl IntoIterator<Item = &'a Record>,
) -> std::collections::BTreeMap<PeId, Vec<Record>> {
    let mut out = std::collections::BTreeMap::new();
    for r in records {
        out.entry(pm.owner_of_key(&r.key))
            .or_insert_with(Vec::new)
            .push(r.clone());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bounds(pm: &PartitionMap) -> Vec<u128> {
        let mut b: Vec<u128> = pm.ranges().iter().map(|r| u128::from(r.lo)).collect();
        b.push(pm.ranges().last().unwrap().hi);
        b
    }

    fn set(ids: &[u32]) -> BTreeSet<PeId> {
        ids.iter().map(|&i| PeId(i)).collect()
    }

    #[test]
    fn single_pe_owns_everything() {
        let pm = PartitionMap::initial(1).unwrap();
        assert_eq!(bounds(&pm), vec![0, HASH_SPACE]);
        assert_eq!(pm.owner_of(u64::MAX), PeId(0));
        pm.validate().unwrap();
    }

    #[test]
    fn four_way_boundaries() {
        let pm = PartitionMap::initial(4).unwrap();
        assert_eq!(bounds(&pm), vec![0, 1 << 62, 1 << 63, 3 << 62, HASH_SPACE]);
        assert_eq!(pm.owner_of(0), PeId(0));
        assert_eq!(pm.owner_of(1 << 63), PeId(2));
        assert_eq!(pm.owner_of((1 << 63) - 1), PeId(1));
        assert_eq!(pm.owner_of(u64::MAX), PeId(3));
    }

    #[test]
    fn three_way_boundaries() {
        let pm = PartitionMap::initial(3).unwrap();
        assert_eq!(
            bounds(&pm),
            vec![
                0,
                6_148_914_691_236_517_205,
                12_297_829_382_473_034_410,
                HASH_SPACE
            ]
        );
        pm.validate().unwrap();
    }

    #[test]
    fn zero_pes_rejected() {
        assert!(PartitionMap::initial(0).is_err());
    }

    #[test]
    fn shrink_splits_failed_range_over_survivors() {
        let pm = PartitionMap::initial(4).unwrap();
        let shrunk = pm.shrink(&set(&[1])).unwrap();
        shrunk.validate().unwrap();
        let q = 1u128 << 62;
        let pieces: Vec<(PeId, u128, u128)> = shrunk
            .ranges()
            .iter()
            .filter(|r| u128::from(r.lo) >= q && r.hi <= 2 * q)
            .map(|r| (r.owner, u128::from(r.lo), r.hi))
            .collect();
        assert_eq!(
            pieces,
            vec![
                (PeId(0), q, q + q / 3),
                (PeId(2), q + q / 3, q + 2 * q / 3),
                (PeId(3), q + 2 * q / 3, 2 * q),
            ]
        );
        assert_eq!(shrunk.live(), vec![PeId(0), PeId(2), PeId(3)]);
        // Survivors keep their original ranges.
        for pe in [0, 2, 3] {
            let orig = pm.ranges_of(PeId(pe)).next().unwrap();
            assert!(shrunk.ranges_of(PeId(pe)).any(|r| r == orig));
        }
    }

    #[test]
    fn shrink_nothing_is_identity() {
        let pm = PartitionMap::initial(5).unwrap();
        assert_eq!(pm.shrink(&BTreeSet::new()).unwrap(), pm);
    }

    #[test]
    fn shrink_everything_fails() {
        let pm = PartitionMap::initial(2).unwrap();
        assert!(pm.shrink(&set(&[0, 1])).is_err());
        assert!(pm.shrink(&set(&[0])).unwrap().shrink(&set(&[0])).is_err());
    }

    #[test]
    fn shrink_onto_single_recipient() {
        let pm = PartitionMap::initial(4).unwrap();
        let shrunk = pm.shrink_onto(&set(&[1]), PeId(2)).unwrap();
        shrunk.validate().unwrap();
        assert_eq!(shrunk.owner_of(1 << 62), PeId(2));
    }

    #[test]
    fn split_targets() {
        let live = [PeId(0), PeId(1), PeId(2), PeId(3)];
        assert_eq!(
            backup_targets(PeId(1), &live, BackupMode::Split, None, 4).unwrap(),
            vec![PeId(0), PeId(2), PeId(3)]
        );
    }

    #[test]
    fn single_target_wraps_and_skips_dead() {
        let live = [PeId(0), PeId(1), PeId(2), PeId(3)];
        assert_eq!(
            backup_targets(PeId(3), &live, BackupMode::Single, None, 4).unwrap(),
            vec![PeId(0)]
        );
        let live = [PeId(0), PeId(1), PeId(3)];
        assert_eq!(
            backup_targets(PeId(1), &live, BackupMode::Single, None, 4).unwrap(),
            vec![PeId(3)]
        );
    }

    #[test]
    fn lone_pe_has_no_target() {
        assert!(backup_targets(PeId(0), &[PeId(0)], BackupMode::Split, None, 1).is_err());
        assert!(backup_targets(PeId(0), &[PeId(0)], BackupMode::Single, None, 1).is_err());
    }

    #[test]
    fn group_targets_stay_outside_group() {
        let groups = FailureGroups::consecutive(4, 2).unwrap();
        let live = [PeId(0), PeId(1), PeId(2), PeId(3)];
        assert_eq!(
            backup_targets(PeId(2), &live, BackupMode::Split, Some(&groups), 4).unwrap(),
            vec![PeId(0), PeId(1)]
        );
        assert_eq!(
            backup_targets(PeId(0), &live, BackupMode::Single, Some(&groups), 4).unwrap(),
            vec![PeId(2)]
        );
        assert!(FailureGroups::consecutive(4, 3).is_err());
    }

    #[test]
    fn split_share_sizes() {
        let t = [PeId(0), PeId(2), PeId(3)];
        let sizes = |n: usize| -> Vec<usize> {
            let recs: Vec<usize> = (0..n).collect();
            split_self_message(&recs, &t)
                .iter()
                .map(|(_, s)| s.len())
                .collect()
        };
        assert_eq!(sizes(6), vec![2, 2, 2]);
        assert_eq!(sizes(7), vec![3, 2, 2]);
        assert_eq!(sizes(0), vec![0, 0, 0]);
    }

    proptest! {
        #[test]
        fn successive_shrinks_keep_coverage(p in 2usize..12, picks in prop::collection::vec(any::<prop::sample::Index>(), 1..6)) {
            let mut pm = PartitionMap::initial(p).unwrap();
            for pick in picks {
                let live = pm.live();
                if live.len() < 2 { break; }
                let victim = *pick.get(&live);
                pm = pm.shrink(&[victim].into_iter().collect()).unwrap();
                pm.validate().unwrap();
                prop_assert!(!pm.is_live(victim));
                prop_assert_eq!(pm.live().len(), live.len() - 1);
            }
        }

        #[test]
        fn owner_is_unique_range(p in 1usize..20, h in any::<u64>()) {
            let pm = PartitionMap::initial(p).unwrap();
            let owner = pm.owner_of(h);
            let hits: Vec<_> = pm.ranges().iter().filter(|r| r.contains(h)).collect();
            prop_assert_eq!(hits.len(), 1);
            prop_assert_eq!(hits[0].owner, owner);
        }

        #[test]
        fn split_is_a_balanced_partition(n in 0usize..200, k in 1usize..17) {
            let recs: Vec<usize> = (0..n).collect();
            let targets: Vec<PeId> = (0..k as u32).map(PeId).collect();
            let shares = split_self_message(&recs, &targets);
            prop_assert_eq!(shares.len(), k);
            let sizes: Vec<usize> = shares.iter().map(|(_, s)| s.len()).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            let mut all: Vec<usize> = shares.into_iter().flat_map(|(_, s)| s).collect();
            all.sort_unstable();
            prop_assert_eq!(all, recs);
        }
    }
}
