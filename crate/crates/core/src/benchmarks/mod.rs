//! The four benchmark jobs, their input sources, and a uniform-key workload
//! for overhead measurement.

pub mod cc;
pub mod generators;
pub mod pagerank;
pub mod rmat;
pub mod wordcount;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::engine::{Job, Source, StepCtx, StepSummary};
use crate::error::{Error, Result, UserFnError};
use crate::record::{sort_records, PeId, Record};

use generators::{chunk, pe_rng, RmatParams};

pub fn encode_u64(x: u64) -> [u8; 8] {
    x.to_le_bytes()
}

pub fn decode_u64(bytes: &[u8]) -> Result<u64, UserFnError> {
    let b: [u8; 8] = bytes.try_into().map_err(|_| {
        UserFnError(format!(
            "expected 8-byte integer, got {} bytes",
            bytes.len()
        ))
    })?;
    Ok(u64::from_le_bytes(b))
}

/// Edge record `u -> v`.
pub fn edge(u: u64, v: u64) -> Record {
    Record::new(encode_u64(u), encode_u64(v))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Benchmark {
    WordCount,
    Rmat,
    ConnectedComponents,
    PageRank,
}

impl Benchmark {
    pub const ALL: [Benchmark; 4] = [
        Benchmark::WordCount,
        Benchmark::Rmat,
        Benchmark::ConnectedComponents,
        Benchmark::PageRank,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Benchmark::WordCount => "wordcount",
            Benchmark::Rmat => "rmat",
            Benchmark::ConnectedComponents => "cc",
            Benchmark::PageRank => "pagerank",
        }
    }

    pub fn default_avg_degree(self) -> f64 {
        match self {
            Benchmark::Rmat => 30.0,
            Benchmark::ConnectedComponents => 0.5,
            Benchmark::PageRank => 38.0,
            Benchmark::WordCount => 0.0,
        }
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Benchmark {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Benchmark::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown benchmark {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchParams {
    pub benchmark: Benchmark,
    pub seed: u64,
    pub vertices_per_pe: u64,
    /// Average degree; the benchmark's default when `None`.
    pub avg_degree: Option<f64>,
    pub words_per_pe: u64,
    pub dictionary_size: usize,
    pub iterations: u64,
}

impl BenchParams {
    pub fn new(benchmark: Benchmark, seed: u64) -> Self {
        BenchParams {
            benchmark,
            seed,
            vertices_per_pe: 1 << 10,
            avg_degree: None,
            words_per_pe: 10_000,
            dictionary_size: 1_000,
            iterations: 100,
        }
    }

    pub fn avg_degree(&self) -> f64 {
        self.avg_degree
            .unwrap_or(self.benchmark.default_avg_degree())
    }

    pub fn vertices(&self, p: usize) -> u64 {
        self.vertices_per_pe * p as u64
    }

    /// Edge count: undirected graphs have `avg * n / 2` edges, directed ones
    /// `avg * n`.
    pub fn edges(&self, p: usize) -> u64 {
        let n = self.vertices(p) as f64;
        let m = match self.benchmark {
            Benchmark::PageRank => self.avg_degree() * n,
            _ => self.avg_degree() * n / 2.0,
        };
        m.round() as u64
    }
}

pub struct Workload {
    pub benchmark: Benchmark,
    pub job: Box<dyn Job>,
    pub source: Box<dyn Source>,
}

impl Workload {
    pub fn build(params: &BenchParams, p: usize) -> Result<Self> {
        let avg = params.avg_degree();
        if !avg.is_finite() || avg < 0.0 {
            return Err(Error::Config(format!("invalid average degree {avg}")));
        }
        let (n, m, seed) = (params.vertices(p), params.edges(p), params.seed);
        let (job, source): (Box<dyn Job>, Box<dyn Source>) = match params.benchmark {
            Benchmark::WordCount => (
                Box::new(wordcount::WordCount),
                Box::new(wordcount::TextSource::new(
                    seed,
                    params.words_per_pe,
                    params.dictionary_size,
                )),
            ),
            Benchmark::Rmat => (
                Box::new(rmat::RmatDedup::new(seed, n, RmatParams::GRAPH500)?),
                Box::new(rmat::RmatSource::new(seed, n, m, RmatParams::GRAPH500)?),
            ),
            Benchmark::ConnectedComponents => (
                Box::new(cc::ConnectedComponents),
                Box::new(cc::GnmGraphSource { seed, n, m }),
            ),
            Benchmark::PageRank => {
                if n == 0 {
                    return Err(Error::Config("PageRank needs at least one vertex".into()));
                }
                (
                    Box::new(pagerank::PageRank {
                        n,
                        iterations: params.iterations,
                    }),
                    Box::new(pagerank::PageRankSource { seed, n, m }),
                )
            }
        };
        Ok(Workload {
            benchmark: params.benchmark,
            job,
            source,
        })
    }
}

/// How far two runs' outputs are apart.
#[derive(Debug, Clone, PartialEq)]
pub enum OutputDiff {
    Equal,
    /// Same vertices and adjacency, scores within `max_deviation`.
    Scores {
        max_deviation: f64,
    },
    Different(String),
}

impl OutputDiff {
    pub fn within(&self, tolerance: f64) -> bool {
        match self {
            OutputDiff::Equal => true,
            OutputDiff::Scores { max_deviation } => *max_deviation <= tolerance,
            OutputDiff::Different(_) => false,
        }
    }
}

/// Compares two output multisets. PageRank scores are compared numerically,
/// everything else byte for byte.
pub fn compare_outputs(benchmark: Benchmark, a: &[Record], b: &[Record]) -> OutputDiff {
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    sort_records(&mut a);
    sort_records(&mut b);
    if a == b {
        return OutputDiff::Equal;
    }
    if benchmark != Benchmark::PageRank {
        return OutputDiff::Different(describe_multiset_diff(&a, &b));
    }
    let states = |rs: &[Record]| -> Result<BTreeMap<u64, (f64, Vec<u64>)>, UserFnError> {
        let mut out = BTreeMap::new();
        for r in rs {
            match pagerank::RankValue::decode(&r.value)? {
                pagerank::RankValue::State { score, neighbors } => {
                    if out
                        .insert(decode_u64(&r.key)?, (score, neighbors))
                        .is_some()
                    {
                        return Err(UserFnError("duplicate vertex state".into()));
                    }
                }
                _ => return Err(UserFnError("output record is not a vertex state".into())),
            }
        }
        Ok(out)
    };
    let (sa, sb) = match (states(&a), states(&b)) {
        (Ok(x), Ok(y)) => (x, y),
        (Err(e), _) | (_, Err(e)) => return OutputDiff::Different(e.to_string()),
    };
    if sa.len() != sb.len() || sa.keys().ne(sb.keys()) {
        return OutputDiff::Different(format!("vertex sets differ ({} vs {})", sa.len(), sb.len()));
    }
    let mut max_deviation: f64 = 0.0;
    for ((v, (x, na)), (_, (y, nb))) in sa.iter().zip(&sb) {
        if na != nb {
            return OutputDiff::Different(format!("adjacency of vertex {v} differs"));
        }
        max_deviation = max_deviation.max((x - y).abs());
    }
    OutputDiff::Scores { max_deviation }
}

fn describe_multiset_diff(a: &[Record], b: &[Record]) -> String {
    let (ca, cb) = (multiplicities(a), multiplicities(b));
    let only_a = ca.iter().filter(|(r, n)| cb.get(*r) != Some(n)).count();
    let only_b = cb.iter().filter(|(r, n)| ca.get(*r) != Some(n)).count();
    format!(
        "{} vs {} records; {only_a} distinct records differ in count on the left, {only_b} on the right",
        a.len(),
        b.len()
    )
}

fn multiplicities(rs: &[Record]) -> BTreeMap<&Record, i64> {
    let mut m = BTreeMap::new();
    for r in rs {
        *m.entry(r).or_default() += 1;
    }
    m
}

/// One identity MapReduce step over records with uniformly random keys.
pub struct UniformKeys {
    pub seed: u64,
    pub records_per_pe: u64,
    pub value_len: usize,
}

impl UniformKeys {
    /// `total` records spread evenly over `p` PEs.
    pub fn total(seed: u64, total: u64, p: usize) -> Self {
        UniformKeys {
            seed,
            records_per_pe: total.div_ceil(p as u64),
            value_len: 8,
        }
    }
}

impl Source for UniformKeys {
    fn generate(&self, pe: PeId, _p: usize) -> Vec<Record> {
        let mut rng = pe_rng(self.seed, pe);
        (0..self.records_per_pe)
            .map(|_| {
                let key: [u8; 8] = rng.gen();
                let value: Vec<u8> = (0..self.value_len).map(|_| rng.gen()).collect();
                Record::new(key, value)
            })
            .collect()
    }
}

/// Identity Map and Reduce for `steps` steps.
pub struct IdentityJob {
    pub steps: u64,
}

impl Job for IdentityJob {
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
        _ctx: StepCtx,
        key: &[u8],
        values: &[&[u8]],
        out: &mut Vec<Record>,
    ) -> Result<u64, UserFnError> {
        out.extend(values.iter().map(|v| Record::new(key, *v)));
        Ok(0)
    }

    fn next_phase(&self, history: &[StepSummary]) -> Option<u32> {
        ((history.len() as u64) < self.steps).then_some(0)
    }
}

/// Vertex range `0..n` owned by PE `i` at ingestion.
pub fn vertex_block(n: u64, p: usize, pe: PeId) -> std::ops::Range<u64> {
    chunk(n, p, pe.index())
}
