use serde::Serialize;

use super::{FocusError, FocusPlot, SketchMatrix, SketchSpec};
use crate::graph::{NodeFeatureTable, TransactionLog};
use crate::linalg::{dot, norm, symmetric_eigen};

const RELATIVE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChangeReport {
    pub history: usize,
    /// `None` for the first `history` windows.
    pub scores: Vec<Option<f64>>,
    pub t_a: usize,
    pub top_dimension: usize,
    /// Per-dimension relative change at `t_a`.
    pub relative_change: Vec<f64>,
}

/// Dominant right singular vector of `rows` (t×l), sign-fixed to a
/// non-negative sum. `None` when every row is zero.
///
/// Works through the t×t Gram matrix `H Hᵀ`: its top eigenvector `u` gives
/// `e ∝ Hᵀ u`.
pub fn principal_direction(rows: &[Vec<f64>]) -> Option<Vec<f64>> {
    let t = rows.len();
    let l = rows.first()?.len();
    let mut gram = vec![0.0; t * t];
    for a in 0..t {
        for b in a..t {
            let g = dot(&rows[a], &rows[b]);
            gram[a * t + b] = g;
            gram[b * t + a] = g;
        }
    }
    let (values, vectors) = symmetric_eigen(&gram, t);
    if values[0].is_nan() || values[0] <= 0.0 {
        return None;
    }
    let u = &vectors[0];
    let mut e = vec![0.0; l];
    for (row, &w) in rows.iter().zip(u) {
        for (x, &k) in e.iter_mut().zip(row) {
            *x += w * k;
        }
    }
    let n = norm(&e);
    if n == 0.0 {
        return None;
    }
    let sign = if e.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    e.iter_mut().for_each(|x| *x *= sign / n);
    Some(e)
}

fn cosine_distance(e: &[f64], k: &[f64]) -> f64 {
    let nk = norm(k);
    if nk == 0.0 {
        return 0.0;
    }
    (1.0 - dot(e, k) / (norm(e) * nk)).clamp(0.0, 1.0)
}

/// Scores each window against the principal direction of the `t` before it.
pub fn change_scores(sketches: &SketchMatrix, t: usize) -> Result<ChangeReport, FocusError> {
    if t < 2 {
        return Err(FocusError::History(t));
    }
    let rows = &sketches.rows;
    if rows.len() <= t {
        return Err(FocusError::TooFewWindows {
            windows: rows.len(),
            history: t,
        });
    }
    let mut scores = vec![None; rows.len()];
    let mut directions = vec![None; rows.len()];
    for i in t..rows.len() {
        let history = &rows[i - t..i];
        let score = match principal_direction(history) {
            Some(e) => {
                let s = cosine_distance(&e, &rows[i]);
                directions[i] = Some(e);
                s
            }
            None => 0.0,
        };
        scores[i] = Some(score);
    }
    let mut t_a = t;
    for i in t..rows.len() {
        if scores[i] > scores[t_a] {
            t_a = i;
        }
    }
    let l = rows[t_a].len();
    let mean_norm = rows[t_a - t..t_a].iter().map(|r| norm(r)).sum::<f64>() / t as f64;
    let scaled: Vec<f64> = match &directions[t_a] {
        Some(e) => e.iter().map(|x| x * mean_norm).collect(),
        None => vec![0.0; l],
    };
    let relative_change: Vec<f64> = rows[t_a]
        .iter()
        .zip(&scaled)
        .map(|(k, e)| (k - e).abs() / (e.max(0.0) + RELATIVE_EPS))
        .collect();
    let mut top_dimension = 0;
    for (j, r) in relative_change.iter().enumerate() {
        if *r > relative_change[top_dimension] {
            top_dimension = j;
        }
    }
    Ok(ChangeReport {
        history: t,
        scores,
        t_a,
        top_dimension,
        relative_change,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeMovement {
    pub node: usize,
    pub account: String,
    /// Mean log-feature coordinates over the history windows, one per plot.
    pub past: Vec<[f64; 2]>,
    /// Coordinates in the flagged window, one per plot.
    pub current: Vec<[f64; 2]>,
    /// Largest Euclidean move across the plots.
    pub displacement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Explanation {
    pub t_a: usize,
    pub window_start: i64,
    pub window_end: i64,
    pub score: f64,
    pub dimension: usize,
    pub plots: Vec<(String, String)>,
    /// Nodes of the dimension's source subset, largest displacement first.
    pub nodes: Vec<NodeMovement>,
}

fn coordinates(table: &NodeFeatureTable, node: usize, plot: FocusPlot) -> [f64; 2] {
    // nodes absent from a window sit at the origin, as in the sketches
    match table.position(node) {
        Some(p) => [table.log[p][plot.feature_a], table.log[p][plot.feature_b]],
        None => [0.0, 0.0],
    }
}

/// Plots and node movements behind the flagged window's top dimension.
pub fn explain(
    report: &ChangeReport,
    spec: &SketchSpec,
    features: &[NodeFeatureTable],
    windows: &[(i64, i64)],
    log: &TransactionLog,
) -> Explanation {
    let all = FocusPlot::all();
    let j = report.top_dimension;
    let plots: Vec<FocusPlot> = spec.selected_plots[j].iter().map(|&p| all[p]).collect();
    let past_tables = &features[report.t_a - report.history..report.t_a];
    let current_table = &features[report.t_a];
    let mut nodes: Vec<NodeMovement> = spec.sources[j]
        .iter()
        .map(|&node| {
            let past: Vec<[f64; 2]> = plots
                .iter()
                .map(|&plot| {
                    let mut acc = [0.0; 2];
                    for table in past_tables {
                        let c = coordinates(table, node, plot);
                        acc[0] += c[0];
                        acc[1] += c[1];
                    }
                    let t = past_tables.len() as f64;
                    [acc[0] / t, acc[1] / t]
                })
                .collect();
            let current: Vec<[f64; 2]> = plots
                .iter()
                .map(|&plot| coordinates(current_table, node, plot))
                .collect();
            let displacement = past
                .iter()
                .zip(&current)
                .map(|(p, c)| (p[0] - c[0]).hypot(p[1] - c[1]))
                .fold(0.0, f64::max);
            NodeMovement {
                node,
                account: log.account_id(node).to_string(),
                past,
                current,
                displacement,
            }
        })
        .collect();
    nodes.sort_by(|a, b| b.displacement.total_cmp(&a.displacement).then(a.node.cmp(&b.node)));
    Explanation {
        t_a: report.t_a,
        window_start: windows[report.t_a].0,
        window_end: windows[report.t_a].1,
        score: report.scores[report.t_a].unwrap_or(0.0),
        dimension: j,
        plots: plots
            .iter()
            .map(|p| {
                let (a, b) = p.names();
                (a.to_string(), b.to_string())
            })
            .collect(),
        nodes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: Vec<Vec<f64>>) -> SketchMatrix {
        SketchMatrix { rows }
    }

    #[test]
    fn stationary_scores_zero() {
        let k = matrix(vec![vec![1.0, 2.0, 3.0]; 8]);
        let r = change_scores(&k, 4).unwrap();
        assert!(r.scores[..4].iter().all(Option::is_none));
        for s in &r.scores[4..] {
            assert!(s.unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn orthogonal_window_scores_one() {
        let mut rows = vec![vec![1.0, 1.0, 0.0]; 4];
        rows.push(vec![0.0, 0.0, 5.0]);
        let r = change_scores(&matrix(rows), 4).unwrap();
        assert!((r.scores[4].unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(r.t_a, 4);
        assert_eq!(r.top_dimension, 2);
    }

    #[test]
    fn zero_history_scores_zero() {
        let mut rows = vec![vec![0.0; 3]; 3];
        rows.push(vec![1.0, 0.0, 0.0]);
        let r = change_scores(&matrix(rows), 3).unwrap();
        assert_eq!(r.scores[3], Some(0.0));
    }

    #[test]
    fn preconditions() {
        let k = matrix(vec![vec![1.0]; 4]);
        assert!(matches!(change_scores(&k, 1), Err(FocusError::History(1))));
        assert!(matches!(
            change_scores(&k, 4),
            Err(FocusError::TooFewWindows { windows: 4, history: 4 })
        ));
    }

    #[test]
    fn direction_is_unit_and_nonnegative() {
        let rows = vec![vec![3.0, 0.0], vec![0.0, 1.0]];
        let e = principal_direction(&rows).unwrap();
        assert!((norm(&e) - 1.0).abs() < 1e-12);
        assert!((e[0] - 1.0).abs() < 1e-9 && e[1].abs() < 1e-9);
        assert!(principal_direction(&[vec![0.0, 0.0]]).is_none());
    }
}
