//! Sequential reference implementations of the benchmarks, shared by the
//! oracle and acceptance tests. Each `check_*` returns a description of the
//! first discrepancy it finds.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use ftmr_core::benchmarks::cc::{decode_labels, ConnectedComponents, GnmGraphSource};
use ftmr_core::benchmarks::generators::RmatParams;
use ftmr_core::benchmarks::pagerank::{decode_scores, PageRank, PageRankSource};
use ftmr_core::benchmarks::rmat::{decode_pair, RmatDedup, RmatSource};
use ftmr_core::benchmarks::wordcount::{decode_counts, TextSource, WordCount};
use ftmr_core::engine::{run_job, EngineConfig, FtConfig, Job, JobOutput, Source};
use ftmr_core::PeId;

pub fn run(job: &dyn Job, source: &dyn Source, p: usize) -> JobOutput {
    run_job(job, source, &EngineConfig::new(p, FtConfig::default()), &[]).expect("job runs")
}

pub fn input(source: &dyn Source, p: usize) -> Vec<ftmr_core::Record> {
    (0..p)
        .flat_map(|i| source.generate(PeId(i as u32), p))
        .collect()
}

pub fn count_words<'a>(lines: impl IntoIterator<Item = &'a [u8]>) -> BTreeMap<String, u64> {
    let mut counts = BTreeMap::new();
    for line in lines {
        for w in std::str::from_utf8(line).unwrap().split_whitespace() {
            *counts.entry(w.to_string()).or_insert(0) += 1;
        }
    }
    counts
}

pub fn check_wordcount(seed: u64, p: usize, words_per_pe: u64, dict: usize) -> Result<(), String> {
    let src = TextSource::new(seed, words_per_pe, dict);
    let want = count_words(input(&src, p).iter().map(|r| r.value.as_slice()));
    let total: u64 = want.values().sum();
    if total != words_per_pe * p as u64 {
        return Err(format!("input holds {total} words"));
    }
    let out = run(&WordCount, &src, p);
    let got: BTreeMap<String, u64> = decode_counts(&out.sorted_records())
        .unwrap()
        .into_iter()
        .collect();
    if got != want {
        return Err(format!(
            "{} words counted, {} expected",
            got.len(),
            want.len()
        ));
    }
    Ok(())
}

/// Smallest vertex of each vertex's component.
pub fn component_minima(n: u64, edges: &[(u64, u64)]) -> Vec<u64> {
    fn find(parent: &mut [u64], x: u64) -> u64 {
        let mut r = x;
        while parent[r as usize] != r {
            r = parent[r as usize];
        }
        let mut x = x;
        while parent[x as usize] != r {
            let next = parent[x as usize];
            parent[x as usize] = r;
            x = next;
        }
        r
    }
    let mut parent: Vec<u64> = (0..n).collect();
    for &(u, v) in edges {
        let (a, b) = (find(&mut parent, u), find(&mut parent, v));
        // Keeping the smaller root makes every root its component minimum.
        let (lo, hi) = (a.min(b), a.max(b));
        parent[hi as usize] = lo;
    }
    (0..n).map(|v| find(&mut parent, v)).collect()
}

pub fn check_cc(seed: u64, p: usize, n: u64, m: u64) -> Result<(), String> {
    let src = GnmGraphSource { seed, n, m };
    let edges: Vec<(u64, u64)> = input(&src, p)
        .iter()
        .map(|r| {
            (
                u64::from_le_bytes(r.key[..].try_into().unwrap()),
                u64::from_le_bytes(r.value[..].try_into().unwrap()),
            )
        })
        .filter(|(u, v)| u != v)
        .collect();
    let want = component_minima(n, &edges);
    let mut got = decode_labels(&run(&ConnectedComponents, &src, p).sorted_records()).unwrap();
    got.sort_unstable();
    let got_vertices: Vec<u64> = got.iter().map(|&(v, _)| v).collect();
    if got_vertices != (0..n).collect::<Vec<_>>() {
        return Err(format!("{} labelled vertices for n = {n}", got.len()));
    }
    for (v, label) in got {
        if label != want[v as usize] {
            return Err(format!(
                "vertex {v} labelled {label}, component minimum is {}",
                want[v as usize]
            ));
        }
    }
    Ok(())
}

pub fn check_rmat(seed: u64, p: usize, n: u64, m: u64) -> Result<(), String> {
    let job = RmatDedup::new(seed, n, RmatParams::GRAPH500).unwrap();
    let src = RmatSource::new(seed, n, m, RmatParams::GRAPH500).unwrap();
    let out = run(&job, &src, p);
    let mut seen = BTreeSet::new();
    for r in out.sorted_records() {
        let (u, v) = decode_pair(&r.key).map_err(|e| e.to_string())?;
        if u > v || v >= n {
            return Err(format!("malformed edge ({u}, {v})"));
        }
        if !seen.insert((u, v)) {
            return Err(format!("edge ({u}, {v}) appears twice"));
        }
    }
    if seen.len() as u64 != m {
        return Err(format!("{} edges, expected {m}", seen.len()));
    }
    Ok(())
}

/// Dense power iteration. A vertex without out-edges spreads its score over
/// all vertices.
pub fn power_iteration(n: usize, adj: &BTreeMap<u64, Vec<u64>>, iterations: u64) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; n]; n];
    for u in 0..n {
        match adj.get(&(u as u64)) {
            Some(out) if !out.is_empty() => {
                for &v in out {
                    m[v as usize][u] += 1.0 / out.len() as f64;
                }
            }
            _ => {
                for row in m.iter_mut() {
                    row[u] += 1.0 / n as f64;
                }
            }
        }
    }
    let mut x = vec![1.0 / n as f64; n];
    let mut history = Vec::new();
    for _ in 0..iterations {
        x = (0..n)
            .map(|v| 0.15 / n as f64 + 0.85 * (0..n).map(|u| m[v][u] * x[u]).sum::<f64>())
            .collect();
        history.push(x.clone());
    }
    history
}

pub fn check_pagerank(
    seed: u64,
    p: usize,
    n: u64,
    m: u64,
    iterations: u64,
    tol: f64,
) -> Result<f64, String> {
    let src = PageRankSource { seed, n, m };
    let adj: BTreeMap<u64, Vec<u64>> = (0..p)
        .flat_map(|i| src.adjacency(PeId(i as u32), p))
        .collect();
    let want = power_iteration(n as usize, &adj, iterations);
    let job = PageRank { n, iterations };
    let got = decode_scores(&run(&job, &src, p).sorted_records()).unwrap();
    if got.len() as u64 != n {
        return Err(format!("{} scores for n = {n}", got.len()));
    }
    let last = want.last().unwrap();
    let dev = got
        .iter()
        .map(|&(v, s)| (s - last[v as usize]).abs())
        .fold(0.0, f64::max);
    if dev > tol {
        return Err(format!("max deviation {dev:e} exceeds {tol:e}"));
    }
    Ok(dev)
}
