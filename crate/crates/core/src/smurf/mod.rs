//! Smurfing detection by greedy reordering of the adjacency matrix.
//!
//! A pattern is a sender, `k ≥ 3` intermediaries and a receiver. Accepted
//! patterns are laid out as contiguous blocks at the top-left of the
//! reordered matrix; the remaining square is the residual `D`. The encoding
//! cost charges, per block `j` starting at offset `b_j` with size `k_j + 2`:
//!
//! - `A_j`, the full diagonal block: `(nnz(A_j) − 2k_j)·2·lg(k_j − 1)`;
//! - `B_j`, intermediary rows × columns right of the block, and `C_j`,
//!   rows below the block × intermediary columns: `nnz·(lg n + lg k_j)`;
//! - the residual: `zeros(D)·2·lg n`;
//! - plus `lg*(J)` for the pattern count and `lg n` per listed index.
//!
//! Purity is `Σ 2k_j / Σ (nnz(A_j) + nnz(B_j) + nnz(C_j))`, which is 1 exactly
//! when every block is a bare star-through with empty strips.

mod detect;
mod model;

pub use detect::{
    detect, detect_candidates, detect_streaming, detect_with, max_intermediaries, Detection, IterationRecord,
    ScoreRule, StreamPoint,
};

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::graph::AdjMatrix;

#[derive(Debug, thiserror::Error)]
pub enum SmurfError {
    #[error("patterns overlap on index {0}")]
    Overlap(usize),
    #[error("pattern has k = {0} intermediaries; at least 3 are required")]
    TooFewIntermediaries(usize),
    #[error("index {index} out of range for {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("pattern reuses index {0} in more than one role")]
    InvalidPattern(usize),
    #[error("purity is undefined without accepted patterns")]
    NoPatterns,
    #[error("block {0} has fewer than 2k nonzeros")]
    SparseBlock(usize),
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
}

/// One sender → intermediaries → receiver structure over dense indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SmurfPattern {
    pub sender: usize,
    pub intermediaries: Vec<usize>,
    pub receiver: usize,
}

impl SmurfPattern {
    pub fn new(sender: usize, intermediaries: Vec<usize>, receiver: usize) -> Self {
        Self {
            sender,
            intermediaries,
            receiver,
        }
    }

    /// Number of intermediaries.
    pub fn k(&self) -> usize {
        self.intermediaries.len()
    }

    /// Block size `k + 2`.
    pub fn size(&self) -> usize {
        self.k() + 2
    }

    /// Indices in block order: sender, intermediaries, receiver.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        std::iter::once(self.sender)
            .chain(self.intermediaries.iter().copied())
            .chain(std::iter::once(self.receiver))
    }

    /// Same roles and the same intermediary set (order ignored).
    pub fn same_structure(&self, other: &SmurfPattern) -> bool {
        if self.sender != other.sender || self.receiver != other.receiver || self.k() != other.k() {
            return false;
        }
        let mut a = self.intermediaries.clone();
        let mut b = other.intermediaries.clone();
        a.sort_unstable();
        b.sort_unstable();
        a == b
    }

    fn check(&self, n: usize) -> Result<(), SmurfError> {
        let mut seen = HashSet::new();
        for i in self.indices() {
            if i >= n {
                return Err(SmurfError::IndexOutOfRange { index: i, n });
            }
            if !seen.insert(i) {
                return Err(SmurfError::InvalidPattern(i));
            }
        }
        Ok(())
    }
}

/// Maximal candidate patterns, one per `(sender, receiver)` pair.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CandidateSet {
    pub candidates: Vec<SmurfPattern>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

/// Collects, for every ordered pair `(s, r)`, the intermediaries `m` with
/// `s → m` and `m → r`; pairs with more than two intermediaries become
/// candidates. Output is sorted by `(sender, receiver)`, intermediaries ascending.
pub fn get_sets(adj: &AdjMatrix) -> CandidateSet {
    let n = adj.n();
    let candidates = (0..n)
        .into_par_iter()
        .map_init(
            || (vec![Vec::<usize>::new(); n], Vec::<usize>::new()),
            |(lists, touched), s| {
                for &m in adj.out_neighbors(s) {
                    if m == s {
                        continue;
                    }
                    for &r in adj.out_neighbors(m) {
                        if r == s || r == m {
                            continue;
                        }
                        if lists[r].is_empty() {
                            touched.push(r);
                        }
                        lists[r].push(m);
                    }
                }
                touched.sort_unstable();
                let mut found = Vec::new();
                for &r in touched.iter() {
                    let inter = std::mem::take(&mut lists[r]);
                    if inter.len() > 2 {
                        found.push(SmurfPattern::new(s, inter, r));
                    }
                }
                touched.clear();
                found
            },
        )
        .flatten()
        .collect();
    CandidateSet { candidates }
}

/// Layout of the reordered matrix plus its cost.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReorderState {
    /// `order[p]` is the original index placed at position `p`.
    pub order: Vec<usize>,
    pub accepted: Vec<SmurfPattern>,
    pub block_starts: Vec<usize>,
    pub total_cost_bits: f64,
    /// Per-accepted-pattern scores, when produced by the greedy search.
    pub scores: Vec<f64>,
}

/// Places each pattern's sender, intermediaries and receiver contiguously,
/// then the remaining indices ascending, and permutes rows and columns.
pub fn reorder(adj: &AdjMatrix, accepted: &[SmurfPattern]) -> Result<(ReorderState, AdjMatrix), SmurfError> {
    let n = adj.n();
    let mut used = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut block_starts = Vec::with_capacity(accepted.len());
    for p in accepted {
        p.check(n)?;
        block_starts.push(order.len());
        for i in p.indices() {
            if used[i] {
                return Err(SmurfError::Overlap(i));
            }
            used[i] = true;
            order.push(i);
        }
    }
    order.extend((0..n).filter(|&i| !used[i]));
    let reordered = adj.permute(&order);
    let mut state = ReorderState {
        order,
        accepted: accepted.to_vec(),
        block_starts,
        total_cost_bits: 0.0,
        scores: Vec::new(),
    };
    state.total_cost_bits = encoding_cost(&state, &reordered)?.total;
    Ok((state, reordered))
}

/// Bits per term of the total encoding cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostBreakdown {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub pattern_count: f64,
    pub indices: f64,
    pub total: f64,
}

/// Nonzero counts of the sub-matrices of a reordered matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockCounts {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    pub c: Vec<usize>,
    pub residual_size: usize,
    pub residual_nnz: usize,
}

impl BlockCounts {
    pub fn residual_zeros(&self) -> usize {
        self.residual_size * self.residual_size - self.residual_nnz
    }
}

#[derive(Clone, Copy)]
enum Slot {
    Sender(usize),
    Intermediary(usize),
    Receiver(usize),
    Residual,
}

impl Slot {
    fn block(self) -> Option<usize> {
        match self {
            Slot::Sender(j) | Slot::Intermediary(j) | Slot::Receiver(j) => Some(j),
            Slot::Residual => None,
        }
    }
}

/// Counts nonzeros of every `A_j`, `B_j`, `C_j` and the residual in one pass.
pub fn block_counts(state: &ReorderState, reordered: &AdjMatrix) -> BlockCounts {
    let n = reordered.n();
    let mut slots = vec![Slot::Residual; n];
    let mut ends = Vec::with_capacity(state.accepted.len());
    for (j, (p, &start)) in state.accepted.iter().zip(&state.block_starts).enumerate() {
        let size = p.size();
        slots[start] = Slot::Sender(j);
        for s in &mut slots[start + 1..start + size - 1] {
            *s = Slot::Intermediary(j);
        }
        slots[start + size - 1] = Slot::Receiver(j);
        ends.push(start + size);
    }
    let blocks_end = ends.last().copied().unwrap_or(0);
    let jn = state.accepted.len();
    let mut counts = BlockCounts {
        a: vec![0; jn],
        b: vec![0; jn],
        c: vec![0; jn],
        residual_size: n - blocks_end,
        residual_nnz: 0,
    };
    for (r, c) in reordered.iter() {
        let (rs, cs) = (slots[r], slots[c]);
        if let (Some(jr), Some(jc)) = (rs.block(), cs.block()) {
            if jr == jc {
                counts.a[jr] += 1;
                continue;
            }
        }
        if let Slot::Intermediary(j) = rs {
            if c >= ends[j] {
                counts.b[j] += 1;
            }
        }
        if let Slot::Intermediary(j) = cs {
            if r >= ends[j] {
                counts.c[j] += 1;
            }
        }
        if r >= blocks_end && c >= blocks_end {
            counts.residual_nnz += 1;
        }
    }
    counts
}

/// Universal code length `lg*(x) ≈ 2·lg x + 1`, with `lg*(0) = 0`.
pub fn lg_star(x: usize) -> f64 {
    if x == 0 {
        0.0
    } else {
        2.0 * (x as f64).log2() + 1.0
    }
}

/// Total description length of a reordered matrix under its layout.
pub fn encoding_cost(state: &ReorderState, reordered: &AdjMatrix) -> Result<CostBreakdown, SmurfError> {
    if let Some(p) = state.accepted.iter().find(|p| p.k() < 3) {
        return Err(SmurfError::TooFewIntermediaries(p.k()));
    }
    let counts = block_counts(state, reordered);
    let lg_n = (reordered.n() as f64).log2();
    let mut cost = CostBreakdown {
        a: 0.0,
        b: 0.0,
        c: 0.0,
        d: 0.0,
        pattern_count: lg_star(state.accepted.len()),
        indices: 0.0,
        total: 0.0,
    };
    for (j, p) in state.accepted.iter().enumerate() {
        let k = p.k() as f64;
        cost.a += (counts.a[j] as f64 - 2.0 * k) * 2.0 * (k - 1.0).log2();
        cost.b += counts.b[j] as f64 * (lg_n + k.log2());
        cost.c += counts.c[j] as f64 * (lg_n + k.log2());
    }
    let listed: usize = state.accepted.iter().map(SmurfPattern::size).sum();
    cost.d = counts.residual_zeros() as f64 * 2.0 * lg_n;
    cost.indices = listed as f64 * lg_n;
    cost.total = cost.a + cost.b + cost.c + cost.d + cost.pattern_count + cost.indices;
    Ok(cost)
}

/// Purity `Σ 2k_j / Σ (nnz(A_j) + nnz(B_j) + nnz(C_j))`, in `(0, 1]`.
pub fn purity(state: &ReorderState, reordered: &AdjMatrix) -> Result<f64, SmurfError> {
    if state.accepted.is_empty() {
        return Err(SmurfError::NoPatterns);
    }
    let counts = block_counts(state, reordered);
    let mut num = 0usize;
    let mut den = 0usize;
    for (j, p) in state.accepted.iter().enumerate() {
        if counts.a[j] < 2 * p.k() {
            return Err(SmurfError::SparseBlock(j));
        }
        num += 2 * p.k();
        den += counts.a[j] + counts.b[j] + counts.c[j];
    }
    Ok(num as f64 / den as f64)
}

/// `p·(c_prev − c_new)/c_prev`; negative when the cost grew. Requires `c_prev > 0`.
pub fn score(p: f64, c_prev: f64, c_new: f64) -> f64 {
    debug_assert!(c_prev > 0.0, "score needs a positive previous cost");
    if c_prev <= 0.0 {
        return 0.0;
    }
    p * (c_prev - c_new) / c_prev
}

#[cfg(test)]
mod tests {
    use super::*;

    /// n = 10: perfect k = 3 pattern on 0 → {1,2,3} → 4 and a residual
    /// 5 × 5 block with 10 nonzeros.
    pub(crate) fn worked_example() -> (AdjMatrix, SmurfPattern) {
        let mut pairs = vec![(0, 1), (0, 2), (0, 3), (1, 4), (2, 4), (3, 4)];
        let residual = [
            (5, 6),
            (6, 7),
            (7, 8),
            (8, 9),
            (9, 5),
            (5, 7),
            (6, 8),
            (7, 9),
            (8, 5),
            (9, 6),
        ];
        pairs.extend(residual);
        (
            AdjMatrix::new(10, pairs).unwrap(),
            SmurfPattern::new(0, vec![1, 2, 3], 4),
        )
    }

    #[test]
    fn worked_cost() {
        let (adj, p) = worked_example();
        let (state, reordered) = reorder(&adj, &[p]).unwrap();
        let cost = encoding_cost(&state, &reordered).unwrap();
        assert_eq!(cost.a, 0.0);
        assert_eq!(cost.b, 0.0);
        assert_eq!(cost.c, 0.0);
        assert!((cost.d - 15.0 * 2.0 * 10f64.log2()).abs() < 1e-9);
        assert_eq!(cost.pattern_count, 1.0);
        assert!((cost.total - 117.27).abs() < 0.01, "{}", cost.total);
        assert_eq!(purity(&state, &reordered).unwrap(), 1.0);
    }

    #[test]
    fn all_ones_has_zero_residual_cost() {
        let pairs = (0..4).flat_map(|i| (0..4).map(move |j| (i, j)));
        let adj = AdjMatrix::new(4, pairs).unwrap();
        let (state, reordered) = reorder(&adj, &[]).unwrap();
        assert_eq!(encoding_cost(&state, &reordered).unwrap().total, 0.0);
    }

    #[test]
    fn empty_layout_cost_counts_zeros() {
        let adj = AdjMatrix::new(5, [(0, 1), (1, 2)]).unwrap();
        let (state, _) = reorder(&adj, &[]).unwrap();
        assert!((state.total_cost_bits - 23.0 * 2.0 * 5f64.log2()).abs() < 1e-9);
        assert_eq!(state.order, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn reorder_order_and_offsets() {
        let adj = AdjMatrix::new(8, [(4, 1), (4, 7), (4, 2), (1, 0), (7, 0), (2, 0)]).unwrap();
        let p = SmurfPattern::new(4, vec![1, 7, 2], 0);
        let (state, reordered) = reorder(&adj, &[p]).unwrap();
        assert_eq!(state.order, vec![4, 1, 7, 2, 0, 3, 5, 6]);
        assert_eq!(reordered.nnz(), adj.nnz());

        let adj = AdjMatrix::new(12, []).unwrap();
        let p1 = SmurfPattern::new(0, vec![1, 2, 3, 4], 5);
        let p2 = SmurfPattern::new(6, vec![7, 8, 9], 10);
        let (state, _) = reorder(&adj, &[p1.clone(), p2]).unwrap();
        assert_eq!(state.block_starts, vec![0, p1.size()]);
    }

    #[test]
    fn reorder_rejects_overlap() {
        let adj = AdjMatrix::new(8, []).unwrap();
        let p1 = SmurfPattern::new(0, vec![1, 2, 3], 4);
        let p2 = SmurfPattern::new(5, vec![3, 6, 7], 1);
        assert!(matches!(reorder(&adj, &[p1, p2]), Err(SmurfError::Overlap(3))));
    }

    #[test]
    fn small_k_is_rejected() {
        let adj = AdjMatrix::new(5, []).unwrap();
        let p = SmurfPattern::new(0, vec![1, 2], 3);
        assert!(matches!(reorder(&adj, &[p]), Err(SmurfError::TooFewIntermediaries(2))));
    }

    #[test]
    fn purity_examples() {
        let base = [(0, 1), (0, 2), (0, 3), (1, 4), (2, 4), (3, 4)];
        let p = SmurfPattern::new(0, vec![1, 2, 3], 4);

        let mut pairs = base.to_vec();
        pairs.push((1, 2));
        let adj = AdjMatrix::new(8, pairs).unwrap();
        let (state, reordered) = reorder(&adj, std::slice::from_ref(&p)).unwrap();
        assert!((purity(&state, &reordered).unwrap() - 6.0 / 7.0).abs() < 1e-12);

        let mut pairs = base.to_vec();
        pairs.extend([(1, 6), (2, 7)]);
        let adj = AdjMatrix::new(8, pairs).unwrap();
        let (state, reordered) = reorder(&adj, &[p]).unwrap();
        assert!((purity(&state, &reordered).unwrap() - 0.75).abs() < 1e-12);

        let (state, reordered) = reorder(&adj, &[]).unwrap();
        assert!(matches!(purity(&state, &reordered), Err(SmurfError::NoPatterns)));
    }

    #[test]
    fn score_arithmetic() {
        assert!((score(0.9, 200.0, 150.0) - 0.225).abs() < 1e-12);
        assert_eq!(score(0.7, 100.0, 100.0), 0.0);
        assert_eq!(score(1.0, 50.0, 0.0), 1.0);
        assert!(score(1.0, 50.0, 60.0) < 0.0);
    }

    #[test]
    fn get_sets_examples() {
        let star = [(0, 1), (0, 2), (0, 3), (1, 4), (2, 4), (3, 4)];
        let sets = get_sets(&AdjMatrix::new(5, star).unwrap());
        assert_eq!(sets.candidates, vec![SmurfPattern::new(0, vec![1, 2, 3], 4)]);

        let two = [(0, 1), (0, 2), (1, 4), (2, 4)];
        assert!(get_sets(&AdjMatrix::new(5, two).unwrap()).is_empty());
        assert!(get_sets(&AdjMatrix::new(5, []).unwrap()).is_empty());
    }

    #[test]
    fn get_sets_two_stars_brute_force() {
        let mut pairs = vec![(0, 1), (0, 2), (0, 3), (1, 4), (2, 4), (3, 4)];
        pairs.extend([(5, 6), (5, 7), (5, 8), (5, 9), (6, 10), (7, 10), (8, 10), (9, 10)]);
        let adj = AdjMatrix::new(11, pairs).unwrap();
        let mut brute = Vec::new();
        for s in 0..11 {
            for r in 0..11 {
                if s == r {
                    continue;
                }
                let inter: Vec<usize> = (0..11)
                    .filter(|&m| m != s && m != r && adj.contains(s, m) && adj.contains(m, r))
                    .collect();
                if inter.len() > 2 {
                    brute.push(SmurfPattern::new(s, inter, r));
                }
            }
        }
        assert_eq!(get_sets(&adj).candidates, brute);
        assert_eq!(brute.len(), 2);
    }
}
