//! Brute-force oracles shared by the property tests and the acceptance harness.
#![allow(dead_code)]

use ledgerscope::focus::{greedy_plots, FocusBipartite, PLOT_COUNT};
use ledgerscope::smurf::{encoding_cost, purity, reorder, SmurfPattern};
use ledgerscope::AdjMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random matrix on at most 12 nodes with one planted star-through and
/// background noise, so that there is always at least one candidate.
pub fn small_smurf_matrix(seed: u64) -> AdjMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(6..=12);
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(&mut rng);
    let k = rng.random_range(3..=n - 2);
    let (s, r) = (ids[0], ids[k + 1]);
    let mut pairs: Vec<(usize, usize)> = ids[1..=k].iter().flat_map(|&m| [(s, m), (m, r)]).collect();
    let density = rng.random_range(0.05..0.35);
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random_bool(density) {
                pairs.push((i, j));
            }
        }
    }
    AdjMatrix::new(n, pairs).unwrap()
}

/// Every `(s, r)` pair with at least three relaying accounts, found by
/// scanning the dense matrix.
pub fn brute_candidates(adj: &AdjMatrix) -> Vec<SmurfPattern> {
    let n = adj.n();
    let mut out = Vec::new();
    for s in 0..n {
        for r in 0..n {
            if s == r {
                continue;
            }
            let mids: Vec<usize> = (0..n)
                .filter(|&m| m != s && m != r && adj.contains(s, m) && adj.contains(m, r))
                .collect();
            if mids.len() >= 3 {
                out.push(SmurfPattern::new(s, mids, r));
            }
        }
    }
    out
}

/// The first pattern the greedy search should accept: the candidate
/// maximising purity × compression computed from scratch (ties: lower cost,
/// then lowest `(sender, receiver)`), provided it lowers the cost.
pub fn brute_first_pick(adj: &AdjMatrix) -> Option<SmurfPattern> {
    let (_, base) = reorder(adj, &[]).unwrap();
    let c0 = encoding_cost(&reorder(adj, &[]).unwrap().0, &base).unwrap().total;
    let mut best: Option<(f64, f64, SmurfPattern)> = None;
    for cand in brute_candidates(adj) {
        let (state, reordered) = reorder(adj, std::slice::from_ref(&cand)).unwrap();
        let cost = encoding_cost(&state, &reordered).unwrap().total;
        if cost >= c0 {
            continue;
        }
        let score = purity(&state, &reordered).unwrap() * (c0 - cost) / c0;
        let better = match &best {
            None => true,
            Some((bs, bc, _)) => score > *bs || (score == *bs && cost < *bc),
        };
        if better {
            best = Some((score, cost, cand));
        }
    }
    best.map(|(_, _, p)| p)
}

/// Random per-node plot totals and a sampled plot subset of size ≤ 10.
pub fn random_plot_instance(seed: u64) -> (Vec<[f64; PLOT_COUNT]>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes = rng.random_range(1..=25);
    let totals = (0..nodes)
        .map(|_| std::array::from_fn(|_| rng.random_range(0.0..4.0)))
        .collect();
    let mut plots: Vec<usize> = (0..PLOT_COUNT).collect();
    plots.shuffle(&mut rng);
    plots.truncate(rng.random_range(1..=10));
    (totals, plots)
}

/// Does greedy's first pick equal the best single plot by exhaustive search?
pub fn greedy_first_matches(totals: &[[f64; PLOT_COUNT]], plots: &[usize]) -> bool {
    let refs: Vec<&[f64; PLOT_COUNT]> = totals.iter().collect();
    let (chosen, gains) = greedy_plots(&refs, plots, 2);
    let value = |d: usize| totals.iter().map(|t| t[d]).sum::<f64>();
    let best = plots.iter().map(|&d| value(d)).fold(f64::NEG_INFINITY, f64::max);
    (value(chosen[0]) - best).abs() <= 1e-12 * best.max(1.0) && (gains[0] - best).abs() <= 1e-9 * best.max(1.0)
}

/// Random bipartites over a shared node universe; each window keeps a random
/// subset of nodes.
pub fn random_bipartites(seed: u64, windows: usize, universe: usize) -> Vec<FocusBipartite> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..windows)
        .map(|w| {
            let nodes: Vec<usize> = (0..universe).filter(|_| rng.random_bool(0.8)).collect();
            let weights = nodes
                .iter()
                .map(|_| std::array::from_fn(|_| rng.random_range(0.0..=1.0)))
                .collect();
            FocusBipartite {
                window_index: w,
                nodes,
                weights,
            }
        })
        .collect()
}
