mod common;

use std::collections::BTreeMap;

use common::*;
use ftmr_core::benchmarks::cc::{decode_labels, ConnectedComponents};
use ftmr_core::benchmarks::edge;
use ftmr_core::benchmarks::pagerank::{decode_scores, PageRank, RankValue};
use ftmr_core::benchmarks::rmat::{decode_pair, pair_key, RmatDedup};
use ftmr_core::benchmarks::wordcount::{decode_counts, WordCount};
use ftmr_core::benchmarks::{encode_u64, generators::RmatParams};
use ftmr_core::engine::{FixedSource, Job};
use ftmr_core::Record;

fn run_fixed(job: &dyn Job, input: Vec<Vec<Record>>) -> Vec<Record> {
    let p = input.len();
    run(job, &FixedSource(input), p).sorted_records()
}

#[test]
fn wordcount_tiny() {
    let out = run_fixed(&WordCount, vec![vec![Record::new("0", "a b a")]]);
    let counts = decode_counts(&out).unwrap();
    assert_eq!(counts, vec![("a".into(), 2), ("b".into(), 1)]);
}

#[test]
fn wordcount_empty_input() {
    assert!(run_fixed(&WordCount, vec![vec![], vec![]]).is_empty());
}

#[test]
fn wordcount_matches_sequential_count() {
    check_wordcount(3, 4, 2_500, 50).unwrap();
}

#[test]
fn rmat_one_duplicate_is_redrawn() {
    let job = RmatDedup::new(1, 8, RmatParams::GRAPH500).unwrap();
    let input = vec![
        vec![Record::new(pair_key(1, 2), "")],
        vec![
            Record::new(pair_key(2, 1), ""),
            Record::new(pair_key(3, 4), ""),
        ],
    ];
    let out = run_fixed(&job, input);
    let edges: Vec<(u64, u64)> = out.iter().map(|r| decode_pair(&r.key).unwrap()).collect();
    assert_eq!(edges.len(), 3, "{edges:?}");
    assert!(edges.contains(&(1, 2)) && edges.contains(&(3, 4)));
}

#[test]
fn rmat_edges_unique_with_exact_count() {
    // n = 2^10 over four PEs, average degree 30.
    check_rmat(5, 4, 1 << 10, 30 * (1 << 10) / 2).unwrap();
}

#[test]
fn cc_two_components() {
    let input = vec![
        vec![edge(1, 2), edge(1, 1), edge(2, 2)],
        vec![edge(3, 4), edge(3, 3), edge(4, 4)],
    ];
    let labels = decode_labels(&run_fixed(&ConnectedComponents, input)).unwrap();
    assert_eq!(labels, vec![(1, 1), (2, 1), (3, 3), (4, 3)]);
}

#[test]
fn cc_isolated_vertices_label_themselves() {
    let input = vec![vec![edge(0, 0), edge(1, 1)], vec![edge(2, 2), edge(0, 2)]];
    let labels = decode_labels(&run_fixed(&ConnectedComponents, input)).unwrap();
    assert_eq!(labels, vec![(0, 0), (1, 1), (2, 0)]);
}

#[test]
fn cc_path_collapses_to_minimum() {
    let path: Vec<Record> = (0..12u64)
        .map(|v| edge(v, v))
        .chain((0..11u64).map(|v| edge(11 - v, 10 - v)))
        .collect();
    let labels =
        decode_labels(&run_fixed(&ConnectedComponents, vec![path.clone(), vec![]])).unwrap();
    assert!(labels.iter().all(|&(_, l)| l == 0), "{labels:?}");
}

#[test]
fn cc_matches_union_find() {
    let n = 1 << 10;
    check_cc(9, 4, n, n / 4).unwrap();
    check_cc(2, 3, 300, 200).unwrap();
}

fn state(v: u64, score: f64, neighbors: Vec<u64>) -> Record {
    Record::new(
        encode_u64(v),
        RankValue::State { score, neighbors }.encode(),
    )
}

#[test]
fn pagerank_two_cycle() {
    let job = PageRank {
        n: 2,
        iterations: 10,
    };
    let out = run_fixed(
        &job,
        vec![vec![state(0, 0.5, vec![1])], vec![state(1, 0.5, vec![0])]],
    );
    assert_eq!(decode_scores(&out).unwrap(), vec![(0, 0.5), (1, 0.5)]);
}

#[test]
fn pagerank_single_vertex() {
    for neighbors in [vec![0], vec![]] {
        let job = PageRank {
            n: 1,
            iterations: 3,
        };
        let out = run_fixed(&job, vec![vec![state(0, 1.0, neighbors)]]);
        assert_eq!(decode_scores(&out).unwrap(), vec![(0, 1.0)]);
    }
}

#[test]
fn pagerank_matches_power_iteration() {
    let dev = check_pagerank(4, 4, 64, 64 * 38, 100, 1e-12).unwrap();
    assert!(dev <= 1e-12);
    // Sparse enough to leave dangling vertices.
    check_pagerank(7, 3, 48, 30, 20, 1e-12).unwrap();
}

#[test]
fn pagerank_mass_is_conserved_every_iteration() {
    for iterations in 1..=6 {
        let src = ftmr_core::benchmarks::pagerank::PageRankSource {
            seed: 8,
            n: 40,
            m: 50,
        };
        let out = run(&PageRank { n: 40, iterations }, &src, 4);
        let total: f64 = decode_scores(&out.sorted_records())
            .unwrap()
            .iter()
            .map(|(_, s)| s)
            .sum();
        assert!(
            (total - 1.0).abs() <= 1e-9,
            "iteration {iterations}: {total}"
        );
    }
}

#[test]
fn power_iteration_oracle_conserves_mass() {
    let adj: BTreeMap<u64, Vec<u64>> = [(0, vec![1, 2]), (1, vec![2]), (2, vec![])]
        .into_iter()
        .collect();
    for x in power_iteration(3, &adj, 5) {
        assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
