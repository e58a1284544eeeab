//! PageRank with damping 0.85 for a fixed number of iterations, one
//! MapReduce step per iteration.
//!
//! Every vertex travels as a `State` record holding its score and
//! out-neighbors. Map sends `score / outdeg` to each neighbor (a vertex
//! without out-edges spreads `score / n` over all vertices) and forwards the
//! adjacency; Reduce sums the incoming contributions and re-emits the state.

use std::collections::BTreeMap;

use rand::Rng;

use crate::engine::{Job, Source, StepCtx, StepSummary};
use crate::error::{DecodeError, UserFnError};
use crate::record::{PeId, Record};

use super::generators::{chunk, pe_rng};
use super::{decode_u64, encode_u64};

pub const DAMPING: f64 = 0.85;

const TAG_STATE: u8 = 0;
const TAG_ADJACENCY: u8 = 1;
const TAG_CONTRIBUTION: u8 = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum RankValue {
    State { score: f64, neighbors: Vec<u64> },
    Adjacency(Vec<u64>),
    Contribution(f64),
}

impl RankValue {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            RankValue::State { score, neighbors } => {
                out.push(TAG_STATE);
                out.extend_from_slice(&score.to_le_bytes());
                encode_ids(neighbors, &mut out);
            }
            RankValue::Adjacency(neighbors) => {
                out.push(TAG_ADJACENCY);
                encode_ids(neighbors, &mut out);
            }
            RankValue::Contribution(x) => {
                out.push(TAG_CONTRIBUTION);
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let (&tag, rest) = bytes.split_first().ok_or(DecodeError {
            offset: 0,
            reason: "empty rank value",
        })?;
        let value = match tag {
            TAG_STATE => {
                let score = read_f64(rest, 1)?;
                RankValue::State {
                    score,
                    neighbors: decode_ids(&rest[8..], 9)?,
                }
            }
            TAG_ADJACENCY => RankValue::Adjacency(decode_ids(rest, 1)?),
            TAG_CONTRIBUTION => {
                if rest.len() != 8 {
                    return Err(DecodeError {
                        offset: 1,
                        reason: "contribution is not 8 bytes",
                    });
                }
                RankValue::Contribution(read_f64(rest, 1)?)
            }
            _ => {
                return Err(DecodeError {
                    offset: 0,
                    reason: "unknown rank value tag",
                })
            }
        };
        Ok(value)
    }
}

fn encode_ids(ids: &[u64], out: &mut Vec<u8>) {
    out.extend_from_slice(&(ids.len() as u32).to_le_bytes());
    for id in ids {
        out.extend_from_slice(&id.to_le_bytes());
    }
}

fn read_f64(bytes: &[u8], offset: usize) -> Result<f64, DecodeError> {
    let b: [u8; 8] = bytes
        .get(..8)
        .and_then(|b| b.try_into().ok())
        .ok_or(DecodeError {
            offset,
            reason: "truncated score",
        })?;
    Ok(f64::from_le_bytes(b))
}

/// Length-prefixed id list that must span `bytes` exactly.
fn decode_ids(bytes: &[u8], offset: usize) -> Result<Vec<u64>, DecodeError> {
    let count: [u8; 4] = bytes
        .get(..4)
        .and_then(|b| b.try_into().ok())
        .ok_or(DecodeError {
            offset,
            reason: "truncated neighbor count",
        })?;
    let count = u32::from_le_bytes(count) as usize;
    let body = &bytes[4..];
    if count.checked_mul(8) != Some(body.len()) {
        return Err(DecodeError {
            offset: offset + 4,
            reason: "neighbor list length mismatch",
        });
    }
    Ok(body
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

pub struct PageRank {
    pub n: u64,
    pub iterations: u64,
}

impl Job for PageRank {
    fn map(
        &self,
        _ctx: StepCtx,
        record: &Record,
        out: &mut Vec<Record>,
    ) -> Result<(), UserFnError> {
        let RankValue::State { score, neighbors } = RankValue::decode(&record.value)? else {
            return Err(UserFnError("map expects vertex state records".into()));
        };
        if neighbors.is_empty() {
            let share = RankValue::Contribution(score / self.n as f64).encode();
            out.extend((0..self.n).map(|w| Record::new(encode_u64(w), share.clone())));
        } else {
            let share = RankValue::Contribution(score / neighbors.len() as f64).encode();
            out.extend(
                neighbors
                    .iter()
                    .map(|&w| Record::new(encode_u64(w), share.clone())),
            );
        }
        out.push(Record::new(
            record.key.clone(),
            RankValue::Adjacency(neighbors).encode(),
        ));
        Ok(())
    }

    fn reduce(
        &self,
        _ctx: StepCtx,
        key: &[u8],
        values: &[&[u8]],
        out: &mut Vec<Record>,
    ) -> Result<u64, UserFnError> {
        let mut adjacency = None;
        let mut incoming = Vec::with_capacity(values.len());
        for v in values {
            match RankValue::decode(v)? {
                RankValue::Contribution(x) => incoming.push(x),
                RankValue::Adjacency(n) if adjacency.is_none() => adjacency = Some(n),
                RankValue::Adjacency(_) => {
                    return Err(UserFnError(
                        "vertex has more than one adjacency record".into(),
                    ))
                }
                RankValue::State { .. } => {
                    return Err(UserFnError("unexpected state record in reduce".into()))
                }
            }
        }
        let neighbors = adjacency.ok_or_else(|| {
            UserFnError(format!(
                "vertex {} has no adjacency record",
                decode_u64(key).unwrap_or(u64::MAX)
            ))
        })?;
        // Summation order must not depend on arrival order.
        incoming.sort_by(f64::total_cmp);
        let sum: f64 = incoming.iter().sum();
        let score = (1.0 - DAMPING) / self.n as f64 + DAMPING * sum;
        out.push(Record::new(
            key,
            RankValue::State { score, neighbors }.encode(),
        ));
        Ok(0)
    }

    fn next_phase(&self, history: &[StepSummary]) -> Option<u32> {
        ((history.len() as u64) < self.iterations).then_some(0)
    }
}

/// Directed G(n, m) graph: PE `i` owns a block of vertices and draws its
/// share of the edges with sources in that block.
pub struct PageRankSource {
    pub seed: u64,
    pub n: u64,
    pub m: u64,
}

impl PageRankSource {
    pub fn adjacency(&self, pe: PeId, p: usize) -> BTreeMap<u64, Vec<u64>> {
        let block = chunk(self.n, p, pe.index());
        let mut adj: BTreeMap<u64, Vec<u64>> = block.clone().map(|v| (v, Vec::new())).collect();
        if block.is_empty() || self.n < 2 {
            return adj;
        }
        let mut rng = pe_rng(self.seed, pe);
        for _ in chunk(self.m, p, pe.index()) {
            let u = rng.gen_range(block.clone());
            let v = rng.gen_range(0..self.n - 1);
            let v = if v >= u { v + 1 } else { v };
            adj.get_mut(&u).expect("source in block").push(v);
        }
        adj
    }
}

impl Source for PageRankSource {
    fn generate(&self, pe: PeId, p: usize) -> Vec<Record> {
        let score = 1.0 / self.n as f64;
        self.adjacency(pe, p)
            .into_iter()
            .map(|(v, neighbors)| {
                Record::new(
                    encode_u64(v),
                    RankValue::State { score, neighbors }.encode(),
                )
            })
            .collect()
    }
}

/// Final `(vertex, score)` pairs from PageRank output.
pub fn decode_scores(records: &[Record]) -> Result<Vec<(u64, f64)>, UserFnError> {
    records
        .iter()
        .map(|r| match RankValue::decode(&r.value)? {
            RankValue::State { score, .. } => Ok((decode_u64(&r.key)?, score)),
            _ => Err(UserFnError("output record is not a vertex state".into())),
        })
        .collect()
}
