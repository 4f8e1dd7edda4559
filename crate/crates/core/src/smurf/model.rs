//! Incremental evaluation of the encoding cost for the greedy search.
//!
//! Appending a block never changes the `A`, `B` or `C` counts of earlier
//! blocks: their strips span every index outside blocks `1..=j`, and that set
//! is fixed once block `j` is placed. So a candidate only needs the in/out
//! degrees of its own indices restricted to the current residual, plus the
//! nonzeros inside its `(k+2)²` block.

use super::{lg_star, SmurfPattern};
use crate::graph::AdjMatrix;

/// Dense row-major bitset of the adjacency, for `O(1)` membership tests.
struct BitMatrix {
    words_per_row: usize,
    words: Vec<u64>,
}

impl BitMatrix {
    fn new(adj: &AdjMatrix) -> Self {
        let n = adj.n();
        let words_per_row = n.div_ceil(64);
        let mut words = vec![0u64; words_per_row * n];
        for (r, c) in adj.iter() {
            words[r * words_per_row + c / 64] |= 1 << (c % 64);
        }
        Self { words_per_row, words }
    }

    #[inline]
    fn get(&self, r: usize, c: usize) -> bool {
        self.words[r * self.words_per_row + c / 64] >> (c % 64) & 1 == 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Evaluation {
    pub cost: f64,
    pub purity: f64,
    nnz_a: usize,
    nnz_b: usize,
    nnz_c: usize,
    cost_a: f64,
    cost_b: f64,
    cost_c: f64,
}

pub(crate) struct CostModel<'a> {
    adj: &'a AdjMatrix,
    bits: BitMatrix,
    lg_n: f64,
    in_residual: Vec<bool>,
    residual: usize,
    residual_nnz: usize,
    out_res: Vec<usize>,
    in_res: Vec<usize>,
    cost_a: f64,
    cost_b: f64,
    cost_c: f64,
    listed: usize,
    patterns: usize,
    purity_num: usize,
    purity_den: usize,
}

impl<'a> CostModel<'a> {
    pub fn new(adj: &'a AdjMatrix) -> Self {
        let n = adj.n();
        Self {
            adj,
            bits: BitMatrix::new(adj),
            lg_n: (n as f64).log2(),
            in_residual: vec![true; n],
            residual: n,
            residual_nnz: adj.nnz(),
            out_res: (0..n).map(|i| adj.out_neighbors(i).len()).collect(),
            in_res: (0..n).map(|i| adj.in_neighbors(i).len()).collect(),
            cost_a: 0.0,
            cost_b: 0.0,
            cost_c: 0.0,
            listed: 0,
            patterns: 0,
            purity_num: 0,
            purity_den: 0,
        }
    }

    fn residual_cost(&self, size: usize, nnz: usize) -> f64 {
        (size * size - nnz) as f64 * 2.0 * self.lg_n
    }

    /// Cost of the currently accepted layout.
    pub fn current_cost(&self) -> f64 {
        self.cost_a
            + self.cost_b
            + self.cost_c
            + self.residual_cost(self.residual, self.residual_nnz)
            + lg_star(self.patterns)
            + self.listed as f64 * self.lg_n
    }

    /// Cost and purity after appending `cand`; `None` if it touches a placed index.
    pub fn evaluate(&self, cand: &SmurfPattern) -> Option<Evaluation> {
        if cand.k() < 3 || !cand.indices().all(|i| self.in_residual[i]) {
            return None;
        }
        let block: Vec<usize> = cand.indices().collect();
        let size = block.len();
        let mut row_in = vec![0usize; size];
        let mut col_in = vec![0usize; size];
        let mut nnz_a = 0;
        for (x, &r) in block.iter().enumerate() {
            for (y, &c) in block.iter().enumerate() {
                if self.bits.get(r, c) {
                    row_in[x] += 1;
                    col_in[y] += 1;
                    nnz_a += 1;
                }
            }
        }
        let mut nnz_b = 0;
        let mut nnz_c = 0;
        for x in 1..size - 1 {
            nnz_b += self.out_res[block[x]] - row_in[x];
            nnz_c += self.in_res[block[x]] - col_in[x];
        }
        let touched: usize = block.iter().map(|&i| self.out_res[i] + self.in_res[i]).sum();
        let residual_nnz = self.residual_nnz - (touched - nnz_a);
        let residual = self.residual - size;

        let k = cand.k() as f64;
        let cost_a = (nnz_a as f64 - 2.0 * k) * 2.0 * (k - 1.0).log2();
        let cost_b = nnz_b as f64 * (self.lg_n + k.log2());
        let cost_c = nnz_c as f64 * (self.lg_n + k.log2());
        let cost = (self.cost_a + cost_a)
            + (self.cost_b + cost_b)
            + (self.cost_c + cost_c)
            + self.residual_cost(residual, residual_nnz)
            + lg_star(self.patterns + 1)
            + (self.listed + size) as f64 * self.lg_n;
        let purity = (self.purity_num + 2 * cand.k()) as f64 / (self.purity_den + nnz_a + nnz_b + nnz_c) as f64;
        Some(Evaluation {
            cost,
            purity,
            nnz_a,
            nnz_b,
            nnz_c,
            cost_a,
            cost_b,
            cost_c,
        })
    }

    /// Appends `cand` to the layout using its precomputed evaluation.
    pub fn accept(&mut self, cand: &SmurfPattern, eval: &Evaluation) {
        for i in cand.indices() {
            self.in_residual[i] = false;
        }
        for i in cand.indices() {
            for &j in self.adj.out_neighbors(i) {
                if self.in_residual[j] {
                    self.in_res[j] -= 1;
                    self.residual_nnz -= 1;
                }
            }
            for &j in self.adj.in_neighbors(i) {
                if self.in_residual[j] {
                    self.out_res[j] -= 1;
                    self.residual_nnz -= 1;
                }
            }
        }
        // edges inside the block were not yet removed from the residual count
        self.residual_nnz -= eval.nnz_a;
        self.residual -= cand.size();
        self.cost_a += eval.cost_a;
        self.cost_b += eval.cost_b;
        self.cost_c += eval.cost_c;
        self.listed += cand.size();
        self.patterns += 1;
        self.purity_num += 2 * cand.k();
        self.purity_den += eval.nnz_a + eval.nnz_b + eval.nnz_c;
    }

    pub fn is_free(&self, cand: &SmurfPattern) -> bool {
        cand.indices().all(|i| self.in_residual[i])
    }
}
