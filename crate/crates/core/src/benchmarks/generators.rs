//! Seeded input generators. Each PE draws from its own stream
//! (`mix_seed(seed, pe)`), so one PE's input can be regenerated alone.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hash::mix_seed;
use crate::record::PeId;

pub fn pe_rng(seed: u64, pe: PeId) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(seed, u64::from(pe.0)))
}

/// `items` split into `p` nearly equal consecutive chunks; returns the
/// half-open range of chunk `i`.
pub fn chunk(items: u64, p: usize, i: usize) -> std::ops::Range<u64> {
    let (p, i) = (p as u64, i as u64);
    let start = i * (items / p) + i.min(items % p);
    let len = items / p + u64::from(i < items % p);
    start..start + len
}

/// Distinct lowercase words of 3 to 10 letters.
pub fn dictionary(seed: u64, size: usize) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0xD1C7));
    let mut seen = std::collections::BTreeSet::new();
    let mut words = Vec::with_capacity(size);
    while words.len() < size {
        let len = rng.gen_range(3..=10);
        let w: String = (0..len)
            .map(|_| char::from(rng.gen_range(b'a'..=b'z')))
            .collect();
        if seen.insert(w.clone()) {
            words.push(w);
        }
    }
    words
}

/// `words` words drawn uniformly from `dict`, grouped into lines of 1 to 12
/// words.
pub fn gen_text(rng: &mut impl Rng, words: u64, dict: &[String]) -> Vec<String> {
    let mut lines = Vec::new();
    let mut left = words;
    while left > 0 {
        let n = rng.gen_range(1..=12).min(left);
        let line: Vec<&str> = (0..n)
            .map(|_| dict[rng.gen_range(0..dict.len())].as_str())
            .collect();
        lines.push(line.join(" "));
        left -= n;
    }
    lines
}

/// `m` directed edges drawn uniformly with replacement from the ordered
/// pairs `(u, v)`, `u != v`, of `0..n`.
pub fn gen_gnm(rng: &mut impl Rng, n: u64, m: u64) -> Vec<(u64, u64)> {
    if n < 2 {
        return Vec::new();
    }
    (0..m)
        .map(|_| {
            let u = rng.gen_range(0..n);
            let v = rng.gen_range(0..n - 1);
            (u, if v >= u { v + 1 } else { v })
        })
        .collect()
}

/// Edge probabilities of the four adjacency-matrix quadrants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmatParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl RmatParams {
    pub const GRAPH500: RmatParams = RmatParams {
        a: 0.57,
        b: 0.19,
        c: 0.19,
        d: 0.05,
    };

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let p = RmatParams { a, b, c, d };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.a, self.b, self.c, self.d];
        if all.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::Config(format!(
                "R-MAT probabilities out of range: {all:?}"
            )));
        }
        let sum: f64 = all.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "R-MAT probabilities sum to {sum}, not 1"
            )));
        }
        Ok(())
    }
}

impl Default for RmatParams {
    fn default() -> Self {
        Self::GRAPH500
    }
}

/// Bits per endpoint needed to address `n` vertices.
pub fn rmat_scale(n: u64) -> u32 {
    n.max(1).next_power_of_two().trailing_zeros()
}

/// One R-MAT edge over `0..n`: a quadrant is chosen per bit level, most
/// significant first; edges outside `0..n` are redrawn.
pub fn rmat_edge(rng: &mut impl Rng, n: u64, params: &RmatParams) -> (u64, u64) {
    let scale = rmat_scale(n);
    loop {
        let (mut u, mut v) = (0u64, 0u64);
        for _ in 0..scale {
            let x: f64 = rng.gen();
            let (bu, bv) = if x < params.a {
                (0, 0)
            } else if x < params.a + params.b {
                (0, 1)
            } else if x < params.a + params.b + params.c {
                (1, 0)
            } else {
                (1, 1)
            };
            u = (u << 1) | bu;
            v = (v << 1) | bv;
        }
        if u < n && v < n {
            return (u, v);
        }
    }
}

pub fn gen_rmat(rng: &mut impl Rng, n: u64, m: u64, params: &RmatParams) -> Vec<(u64, u64)> {
    (0..m).map(|_| rmat_edge(rng, n, params)).collect()
}
