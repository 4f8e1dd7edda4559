use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{FocusBipartite, FocusError, PLOT_COUNT};
use crate::rng;

const MAX_RESAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SketchConfig {
    /// Sketch dimension `l`.
    pub dim: usize,
    /// Plots kept per dimension `v`.
    pub plots_per_dim: usize,
    pub source_prob: f64,
    pub dest_prob: f64,
    pub seed: u64,
}

/// Per-dimension node subsets and selected plots, fixed across windows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SketchSpec {
    pub config: SketchConfig,
    /// `S_j`, sorted node indices.
    pub sources: Vec<Vec<usize>>,
    /// `D_j`, sorted plot indices.
    pub sampled_plots: Vec<Vec<usize>>,
    /// `V_j`, in greedy selection order.
    pub selected_plots: Vec<Vec<usize>>,
    /// Marginal gain of each selected plot.
    pub gains: Vec<Vec<f64>>,
}

impl SketchSpec {
    pub fn dim(&self) -> usize {
        self.sources.len()
    }
}

/// One row per window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SketchMatrix {
    pub rows: Vec<Vec<f64>>,
}

/// Total weight of every (node, plot) edge over all windows.
pub(crate) fn total_weights(bipartites: &[FocusBipartite]) -> BTreeMap<usize, [f64; PLOT_COUNT]> {
    let mut totals: BTreeMap<usize, [f64; PLOT_COUNT]> = BTreeMap::new();
    for b in bipartites {
        for (node, w) in b.nodes.iter().zip(&b.weights) {
            let t = totals.entry(*node).or_insert([0.0; PLOT_COUNT]);
            t.iter_mut().zip(w).for_each(|(a, x)| *a += x);
        }
    }
    totals
}

/// Greedy selection of `v` plots from `candidates` maximising
/// `f(V) = Σ_s max_{d∈V} totals[s][d]`. Returns plots and their marginal gains.
pub fn greedy_plots(totals: &[&[f64; PLOT_COUNT]], candidates: &[usize], v: usize) -> (Vec<usize>, Vec<f64>) {
    let mut covered = vec![0.0; totals.len()];
    let mut chosen = Vec::with_capacity(v);
    let mut gains = Vec::with_capacity(v);
    let mut remaining = candidates.to_vec();
    while chosen.len() < v && !remaining.is_empty() {
        let mut best = (f64::NEG_INFINITY, 0usize);
        for (pos, &d) in remaining.iter().enumerate() {
            let gain: f64 = totals.iter().zip(&covered).map(|(t, &c)| (t[d] - c).max(0.0)).sum();
            if gain > best.0 {
                best = (gain, pos);
            }
        }
        let d = remaining.remove(best.1);
        for (c, t) in covered.iter_mut().zip(totals) {
            *c = c.max(t[d]);
        }
        chosen.push(d);
        gains.push(best.0);
    }
    (chosen, gains)
}

/// Sources, destinations, plot nodes and plot totals drawn for one dimension.
type DimDraw = (Vec<usize>, Vec<usize>, Vec<usize>, Vec<f64>);

/// Samples `S_j` and `D_j` for every dimension and greedily picks `V_j`.
pub fn make_sketch_spec(bipartites: &[FocusBipartite], cfg: &SketchConfig) -> Result<SketchSpec, FocusError> {
    if bipartites.is_empty() {
        return Err(FocusError::NoWindows);
    }
    if cfg.dim == 0 || cfg.plots_per_dim == 0 || cfg.plots_per_dim > PLOT_COUNT {
        return Err(FocusError::Params(format!(
            "need dim ≥ 1 and 1 ≤ plots_per_dim ≤ {PLOT_COUNT}"
        )));
    }
    for p in [cfg.source_prob, cfg.dest_prob] {
        if !(p > 0.0 && p <= 1.0) {
            return Err(FocusError::Params(format!("probability {p} outside (0, 1]")));
        }
    }
    let totals = total_weights(bipartites);
    let universe: Vec<usize> = totals.keys().copied().collect();
    if universe.is_empty() {
        return Err(FocusError::NoWindows);
    }
    let dims: Vec<DimDraw> = (0..cfg.dim)
        .into_par_iter()
        .map(|j| {
            let mut rng = rng::chacha(cfg.seed, &[j as u64]);
            let mut sources = Vec::new();
            for _ in 0..MAX_RESAMPLES {
                sources = universe
                    .iter()
                    .copied()
                    .filter(|_| rng.random_bool(cfg.source_prob))
                    .collect();
                if !sources.is_empty() {
                    break;
                }
            }
            if sources.is_empty() {
                return Err(FocusError::SourceSampling(j));
            }
            let mut plots = Vec::new();
            for _ in 0..MAX_RESAMPLES {
                plots = (0..PLOT_COUNT).filter(|_| rng.random_bool(cfg.dest_prob)).collect();
                if plots.len() >= cfg.plots_per_dim {
                    break;
                }
            }
            if plots.len() < cfg.plots_per_dim {
                return Err(FocusError::PlotSampling {
                    dimension: j,
                    needed: cfg.plots_per_dim,
                });
            }
            let rows: Vec<&[f64; PLOT_COUNT]> = sources.iter().map(|s| &totals[s]).collect();
            let (selected, gains) = greedy_plots(&rows, &plots, cfg.plots_per_dim);
            Ok((sources, plots, selected, gains))
        })
        .collect::<Result<_, _>>()?;
    let mut spec = SketchSpec {
        config: *cfg,
        sources: Vec::with_capacity(cfg.dim),
        sampled_plots: Vec::with_capacity(cfg.dim),
        selected_plots: Vec::with_capacity(cfg.dim),
        gains: Vec::with_capacity(cfg.dim),
    };
    for (s, d, v, g) in dims {
        spec.sources.push(s);
        spec.sampled_plots.push(d);
        spec.selected_plots.push(v);
        spec.gains.push(g);
    }
    Ok(spec)
}

/// `K_i[j] = Σ_{s∈S_j} max_{d∈V_j} w^i(s, d)`; absent nodes contribute 0.
pub fn sketch_windows(bipartites: &[FocusBipartite], spec: &SketchSpec) -> SketchMatrix {
    let rows = bipartites
        .par_iter()
        .map(|b| {
            (0..spec.dim())
                .map(|j| {
                    spec.sources[j]
                        .iter()
                        .filter_map(|&s| b.weights_of(s))
                        .map(|w| spec.selected_plots[j].iter().map(|&d| w[d]).fold(0.0, f64::max))
                        .sum()
                })
                .collect()
        })
        .collect();
    SketchMatrix { rows }
}
