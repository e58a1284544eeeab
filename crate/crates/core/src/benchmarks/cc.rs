//! Connected components by alternating Large-Star and Small-Star rounds.
//!
//! Records are edges `(u -> v)` with 8-byte LE ids. A record with `u == v` is
//! a vertex marker that keeps isolated vertices in the output. After a
//! Large-Star/Small-Star round with no changed edge, every component is a star
//! around its minimum vertex, and a final labelling step emits
//! `(vertex, representative)`.

use std::collections::BTreeSet;

use crate::engine::{Job, Source, StepCtx, StepSummary};
use crate::error::UserFnError;
use crate::record::{PeId, Record};

use super::generators::{chunk, gen_gnm, pe_rng};
use super::{decode_u64, edge};

pub const LARGE_STAR: u32 = 0;
pub const SMALL_STAR: u32 = 1;
pub const LABEL: u32 = 2;

pub struct ConnectedComponents;

impl Job for ConnectedComponents {
    fn map(&self, ctx: StepCtx, record: &Record, out: &mut Vec<Record>) -> Result<(), UserFnError> {
        let u = decode_u64(&record.key)?;
        let v = decode_u64(&record.value)?;
        if u == v {
            out.push(edge(u, u));
            return Ok(());
        }
        match ctx.phase {
            SMALL_STAR => out.push(edge(u.max(v), u.min(v))),
            _ => {
                out.push(edge(u, v));
                out.push(edge(v, u));
            }
        }
        Ok(())
    }

    fn reduce(
        &self,
        ctx: StepCtx,
        key: &[u8],
        values: &[&[u8]],
        out: &mut Vec<Record>,
    ) -> Result<u64, UserFnError> {
        let u = decode_u64(key)?;
        let mut neighbors = BTreeSet::new();
        for v in values {
            let v = decode_u64(v)?;
            if v != u {
                neighbors.insert(v);
            }
        }
        let m = neighbors.first().copied().unwrap_or(u).min(u);
        let mut changes = 0;
        match ctx.phase {
            LARGE_STAR => {
                out.push(edge(u, u));
                for &v in neighbors.range(u + 1..) {
                    out.push(edge(v, m));
                    if m != u {
                        changes += 1;
                    }
                }
            }
            SMALL_STAR => {
                out.push(edge(u, u));
                if !neighbors.is_empty() {
                    out.push(edge(u, m));
                    for &v in neighbors.iter().filter(|&&v| v != m) {
                        out.push(edge(v, m));
                        changes += 1;
                    }
                }
            }
            _ => out.push(edge(u, m)),
        }
        Ok(changes)
    }

    fn next_phase(&self, history: &[StepSummary]) -> Option<u32> {
        let Some(last) = history.last() else {
            return Some(LARGE_STAR);
        };
        match last.ctx.phase {
            LARGE_STAR => Some(SMALL_STAR),
            SMALL_STAR => {
                let ls = history[history.len() - 2].aggregate;
                Some(if ls + last.aggregate == 0 {
                    LABEL
                } else {
                    LARGE_STAR
                })
            }
            _ => None,
        }
    }
}

/// Undirected G(n, m) graph over `n` vertices: PE `i` draws its share of the
/// edges and emits markers for its block of vertices.
pub struct GnmGraphSource {
    pub seed: u64,
    pub n: u64,
    pub m: u64,
}

impl Source for GnmGraphSource {
    fn generate(&self, pe: PeId, p: usize) -> Vec<Record> {
        let count = chunk(self.m, p, pe.index()).count() as u64;
        let mut out: Vec<Record> = gen_gnm(&mut pe_rng(self.seed, pe), self.n, count)
            .into_iter()
            .map(|(u, v)| edge(u, v))
            .collect();
        out.extend(chunk(self.n, p, pe.index()).map(|v| edge(v, v)));
        out
    }
}

/// Decodes `(vertex, representative)` output pairs.
pub fn decode_labels(records: &[Record]) -> Result<Vec<(u64, u64)>, UserFnError> {
    records
        .iter()
        .map(|r| Ok((decode_u64(&r.key)?, decode_u64(&r.value)?)))
        .collect()
}
