use std::cmp::Ordering;

use rayon::prelude::*;
use serde::Serialize;

use super::model::{CostModel, Evaluation};
use super::{get_sets, reorder, CandidateSet, SmurfError, SmurfPattern};
use crate::graph::{binary_adjacency, window_split, AdjMatrix, TransactionLog};

/// What the greedy loop maximises when picking the next pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreRule {
    /// Purity × compression rate.
    Full,
    /// Purity alone.
    PurityOnly,
    /// Compression rate alone.
    CompressionOnly,
}

/// One accepted pattern with the cost after accepting it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub pattern: SmurfPattern,
    pub cost_bits: f64,
    pub score: f64,
    pub purity: f64,
    pub compression: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Detection {
    /// Reported patterns, most suspicious first: the shortest non-empty
    /// accepted prefix whose cost is within 10% of the minimum.
    pub patterns: Vec<SmurfPattern>,
    /// Permutation of the reported layout; `order[p]` is the original index at `p`.
    pub order: Vec<usize>,
    /// Every accepted pattern in acceptance order.
    pub history: Vec<IterationRecord>,
    pub initial_cost: f64,
    /// Cost of the reported layout.
    pub final_cost: f64,
    pub candidate_count: usize,
}

impl Detection {
    /// `(c0 − c_final)/c0`, or 0 when nothing was reported.
    pub fn compression_rate(&self) -> f64 {
        if self.patterns.is_empty() || self.initial_cost <= 0.0 {
            0.0
        } else {
            (self.initial_cost - self.final_cost) / self.initial_cost
        }
    }
}

/// Slack above the minimum cost tolerated when trimming the accepted list.
pub const EARLY_STOP_SLACK: f64 = 0.10;

struct Pick {
    index: usize,
    eval: Evaluation,
    score: f64,
    sender: usize,
    receiver: usize,
}

/// Larger score first, then lower cost, then lowest `(sender, receiver)`.
fn better(a: &Pick, b: &Pick) -> Ordering {
    a.score
        .total_cmp(&b.score)
        .then(b.eval.cost.total_cmp(&a.eval.cost))
        .then((b.sender, b.receiver).cmp(&(a.sender, a.receiver)))
}

/// Greedy detection with the full purity × compression score.
pub fn detect(adj: &AdjMatrix) -> Detection {
    detect_with(adj, ScoreRule::Full)
}

pub fn detect_with(adj: &AdjMatrix, rule: ScoreRule) -> Detection {
    let candidates = get_sets(adj);
    detect_candidates(adj, &candidates, rule)
}

/// The greedy loop over a precomputed candidate set.
pub fn detect_candidates(adj: &AdjMatrix, candidates: &CandidateSet, rule: ScoreRule) -> Detection {
    let mut model = CostModel::new(adj);
    let initial_cost = model.current_cost();
    let mut cost = initial_cost;
    let mut alive: Vec<usize> = (0..candidates.len()).collect();
    let mut history = Vec::new();

    while cost > 0.0 && !alive.is_empty() {
        let best = alive
            .par_iter()
            .filter_map(|&index| {
                let cand = &candidates.candidates[index];
                let eval = model.evaluate(cand)?;
                if eval.cost >= cost {
                    return None;
                }
                let compression = (cost - eval.cost) / cost;
                let score = match rule {
                    ScoreRule::Full => eval.purity * compression,
                    ScoreRule::PurityOnly => eval.purity,
                    ScoreRule::CompressionOnly => compression,
                };
                Some(Pick {
                    index,
                    eval,
                    score,
                    sender: cand.sender,
                    receiver: cand.receiver,
                })
            })
            .reduce_with(|a, b| if better(&a, &b) == Ordering::Less { b } else { a });
        let Some(best) = best else { break };
        let pattern = &candidates.candidates[best.index];
        model.accept(pattern, &best.eval);
        history.push(IterationRecord {
            pattern: pattern.clone(),
            cost_bits: best.eval.cost,
            score: best.score,
            purity: best.eval.purity,
            compression: (cost - best.eval.cost) / cost,
        });
        cost = best.eval.cost;
        alive.retain(|&i| model.is_free(&candidates.candidates[i]));
    }

    let costs: Vec<f64> = std::iter::once(initial_cost)
        .chain(history.iter().map(|h| h.cost_bits))
        .collect();
    let min_cost = costs.iter().copied().fold(f64::INFINITY, f64::min);
    // shortest non-empty prefix within the slack; the empty layout is never
    // reported once something was accepted
    let keep = costs
        .iter()
        .skip(1)
        .position(|&c| c <= (1.0 + EARLY_STOP_SLACK) * min_cost)
        .map_or(0, |p| p + 1);
    let patterns: Vec<SmurfPattern> = history[..keep].iter().map(|h| h.pattern.clone()).collect();
    let order = reorder(adj, &patterns)
        .expect("accepted patterns are disjoint candidates")
        .0
        .order;
    Detection {
        patterns,
        order,
        history,
        initial_cost,
        final_cost: costs[keep],
        candidate_count: candidates.len(),
    }
}

/// Baseline that reports the candidate with the most intermediaries
/// (ties: lowest sender, then receiver).
pub fn max_intermediaries(candidates: &CandidateSet) -> Option<&SmurfPattern> {
    candidates.candidates.iter().min_by(|a, b| {
        b.k()
            .cmp(&a.k())
            .then((a.sender, a.receiver).cmp(&(b.sender, b.receiver)))
    })
}

/// Compression rate of the detected layout in one window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StreamPoint {
    pub window_start: i64,
    pub compression_rate: f64,
}

/// Runs [`detect`] on each window's adjacency.
pub fn detect_streaming(log: &TransactionLog, window_days: u32, overlap: f64) -> Result<Vec<StreamPoint>, SmurfError> {
    let windows = window_split(log, window_days, overlap)?;
    windows
        .par_iter()
        .map(|w| {
            let adj = binary_adjacency(w, log.n())?;
            Ok(StreamPoint {
                window_start: w.window_start,
                compression_rate: detect(&adj).compression_rate(),
            })
        })
        .collect()
}
