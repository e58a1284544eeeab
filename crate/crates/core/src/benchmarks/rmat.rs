//! R-MAT edge generation with iterative duplicate elimination. Each step
//! keeps one copy of every undirected edge and redraws a fresh R-MAT edge for
//! every duplicate, until no duplicates remain.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::engine::{Job, Source, StepCtx, StepSummary};
use crate::error::{Error, Result, UserFnError};
use crate::hash::mix_seeds;
use crate::record::{PeId, Record};

use super::generators::{chunk, gen_rmat, pe_rng, rmat_edge, RmatParams};

/// 16-byte key of the undirected edge `{u, v}`: `min` then `max`, both LE.
pub fn pair_key(u: u64, v: u64) -> Vec<u8> {
    let (a, b) = if u <= v { (u, v) } else { (v, u) };
    let mut k = Vec::with_capacity(16);
    k.extend_from_slice(&a.to_le_bytes());
    k.extend_from_slice(&b.to_le_bytes());
    k
}

pub fn decode_pair(key: &[u8]) -> Result<(u64, u64), UserFnError> {
    let bytes: [u8; 16] = key
        .try_into()
        .map_err(|_| UserFnError(format!("edge key of {} bytes, expected 16", key.len())))?;
    let (a, b) = bytes.split_at(8);
    Ok((
        u64::from_le_bytes(a.try_into().expect("8 bytes")),
        u64::from_le_bytes(b.try_into().expect("8 bytes")),
    ))
}

/// Number of distinct undirected pairs, self-loops included.
pub fn distinct_pairs(n: u64) -> u128 {
    u128::from(n) * (u128::from(n) + 1) / 2
}

pub struct RmatDedup {
    seed: u64,
    n: u64,
    params: RmatParams,
}

impl RmatDedup {
    pub fn new(seed: u64, n: u64, params: RmatParams) -> Result<Self> {
        params.validate()?;
        Ok(RmatDedup { seed, n, params })
    }
}

impl Job for RmatDedup {
    fn map(
        &self,
        _ctx: StepCtx,
        record: &Record,
        out: &mut Vec<Record>,
    ) -> Result<(), UserFnError> {
        out.push(record.clone());
        Ok(())
    }

    fn reduce(
        &self,
        ctx: StepCtx,
        key: &[u8],
        values: &[&[u8]],
        out: &mut Vec<Record>,
    ) -> Result<u64, UserFnError> {
        let (u, v) = decode_pair(key)?;
        out.push(Record::new(key, Vec::new()));
        let dups = values.len() as u64 - 1;
        for j in 1..=dups {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seeds(self.seed, &[ctx.step.0, u, v, j]));
            let (a, b) = rmat_edge(&mut rng, self.n, &self.params);
            out.push(Record::new(pair_key(a, b), Vec::new()));
        }
        Ok(dups)
    }

    fn next_phase(&self, history: &[StepSummary]) -> Option<u32> {
        match history.last() {
            None => Some(0),
            Some(s) if s.aggregate > 0 => Some(0),
            Some(_) => None,
        }
    }
}

/// Each PE draws its share of the `m` initial R-MAT edges.
pub struct RmatSource {
    seed: u64,
    n: u64,
    m: u64,
    params: RmatParams,
}

impl RmatSource {
    pub fn new(seed: u64, n: u64, m: u64, params: RmatParams) -> Result<Self> {
        params.validate()?;
        if u128::from(m) > distinct_pairs(n) {
            return Err(Error::Config(format!(
                "{m} unique edges requested but only {} distinct pairs exist over {n} vertices",
                distinct_pairs(n)
            )));
        }
        Ok(RmatSource { seed, n, m, params })
    }
}

impl Source for RmatSource {
    fn generate(&self, pe: PeId, p: usize) -> Vec<Record> {
        let count = chunk(self.m, p, pe.index()).count() as u64;
        gen_rmat(&mut pe_rng(self.seed, pe), self.n, count, &self.params)
            .into_iter()
            .map(|(u, v)| Record::new(pair_key(u, v), Vec::new()))
            .collect()
    }
}
