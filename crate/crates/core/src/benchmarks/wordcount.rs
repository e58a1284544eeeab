//! Word Count: one step, Map splits lines on ASCII whitespace, Reduce sums.

use crate::engine::{Job, Source, StepCtx, StepSummary};
use crate::error::UserFnError;
use crate::record::{PeId, Record};

use super::generators::{dictionary, gen_text, pe_rng};
use super::{decode_u64, encode_u64};

pub struct WordCount;

impl Job for WordCount {
    fn map(
        &self,
        _ctx: StepCtx,
        record: &Record,
        out: &mut Vec<Record>,
    ) -> Result<(), UserFnError> {
        for word in record
            .value
            .split(u8::is_ascii_whitespace)
            .filter(|w| !w.is_empty())
        {
            out.push(Record::new(word, encode_u64(1)));
        }
        Ok(())
    }

    fn reduce(
        &self,
        _ctx: StepCtx,
        key: &[u8],
        values: &[&[u8]],
        out: &mut Vec<Record>,
    ) -> Result<u64, UserFnError> {
        let mut total = 0u64;
        for v in values {
            total += decode_u64(v)?;
        }
        out.push(Record::new(key, encode_u64(total)));
        Ok(0)
    }

    fn next_phase(&self, history: &[StepSummary]) -> Option<u32> {
        history.is_empty().then_some(0)
    }
}

/// Uniformly random words from a seeded dictionary; one record per line,
/// keyed by the global line number.
pub struct TextSource {
    seed: u64,
    words_per_pe: u64,
    dict: Vec<String>,
}

impl TextSource {
    pub fn new(seed: u64, words_per_pe: u64, dictionary_size: usize) -> Self {
        TextSource {
            seed,
            words_per_pe,
            dict: dictionary(seed, dictionary_size.max(1)),
        }
    }

    pub fn dictionary(&self) -> &[String] {
        &self.dict
    }
}

impl Source for TextSource {
    fn generate(&self, pe: PeId, _p: usize) -> Vec<Record> {
        let lines = gen_text(&mut pe_rng(self.seed, pe), self.words_per_pe, &self.dict);
        let base = u64::from(pe.0) << 32;
        lines
            .into_iter()
            .enumerate()
            .map(|(i, line)| Record::new(encode_u64(base | i as u64), line))
            .collect()
    }
}

/// Decodes Word Count output into `(word, count)` pairs.
pub fn decode_counts(records: &[Record]) -> Result<Vec<(String, u64)>, UserFnError> {
    records
        .iter()
        .map(|r| {
            Ok((
                String::from_utf8_lossy(&r.key).into_owned(),
                decode_u64(&r.value)?,
            ))
        })
        .collect()
}
