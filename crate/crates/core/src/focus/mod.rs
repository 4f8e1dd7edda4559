//! Attention routing over a windowed ledger.
//!
//! Each window becomes a bipartite graph between active nodes and the 66
//! two-feature plots, weighted by the node's isolation-forest score on that
//! plot. Windows are compressed into `l`-dimensional sketches; a window whose
//! sketch turns away from the principal direction of the preceding `t`
//! sketches is flagged, and the sketch dimension that moved the most names the
//! nodes and plots to look at.

mod change;
mod sketch;

pub use change::{change_scores, explain, principal_direction, ChangeReport, Explanation, NodeMovement};
pub use sketch::{greedy_plots, make_sketch_spec, sketch_windows, SketchConfig, SketchMatrix, SketchSpec};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anomaly::{fit_score, AnomalyError, ForestParams};
use crate::graph::{node_features, window_split, Feature, GraphError, NodeFeatureTable, TransactionLog, FEATURE_COUNT};
use crate::rng;

/// Number of feature pairs `C(12, 2)`.
pub const PLOT_COUNT: usize = FEATURE_COUNT * (FEATURE_COUNT - 1) / 2;

#[derive(Debug, thiserror::Error)]
pub enum FocusError {
    #[error("window has {0} active node(s); at least 2 are needed")]
    TooFewNodes(usize),
    #[error("need more than {history} windows, got {windows}")]
    TooFewWindows { windows: usize, history: usize },
    #[error("history length must be at least 2, got {0}")]
    History(usize),
    #[error("no bipartite graphs to sketch")]
    NoWindows,
    #[error("could not sample {needed} plots for dimension {dimension} in 100 attempts")]
    PlotSampling { dimension: usize, needed: usize },
    #[error("could not sample a non-empty source set for dimension {0} in 100 attempts")]
    SourceSampling(usize),
    #[error("invalid sketch parameters: {0}")]
    Params(String),
    #[error(transparent)]
    Anomaly(#[from] AnomalyError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// A 2-d scatter over features `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FocusPlot {
    pub feature_a: usize,
    pub feature_b: usize,
}

impl FocusPlot {
    /// All `C(q, 2)` plots in lexicographic order.
    pub fn all() -> Vec<FocusPlot> {
        (0..FEATURE_COUNT)
            .flat_map(|a| {
                ((a + 1)..FEATURE_COUNT).map(move |b| FocusPlot {
                    feature_a: a,
                    feature_b: b,
                })
            })
            .collect()
    }

    pub fn names(self) -> (&'static str, &'static str) {
        (Feature::ALL[self.feature_a].name(), Feature::ALL[self.feature_b].name())
    }

    pub fn contains(self, feature: usize) -> bool {
        self.feature_a == feature || self.feature_b == feature
    }
}

/// Node ↔ plot anomaly weights for one window.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FocusBipartite {
    pub window_index: usize,
    /// Sorted node indices.
    pub nodes: Vec<usize>,
    /// `weights[p][plot]` for `nodes[p]`, in `[0, 1]`.
    pub weights: Vec<[f64; PLOT_COUNT]>,
}

impl FocusBipartite {
    pub fn weights_of(&self, node: usize) -> Option<&[f64; PLOT_COUNT]> {
        self.nodes.binary_search(&node).ok().map(|p| &self.weights[p])
    }
}

/// Scores every active node on every plot of log-scaled features.
///
/// Each plot uses its own forest seed, shared across windows.
pub fn build_bipartite(
    window_index: usize,
    features: &NodeFeatureTable,
    params: &ForestParams,
) -> Result<FocusBipartite, FocusError> {
    if features.len() < 2 {
        return Err(FocusError::TooFewNodes(features.len()));
    }
    let plots = FocusPlot::all();
    let per_plot: Vec<Vec<f64>> = plots
        .par_iter()
        .enumerate()
        .map(|(i, plot)| {
            let points: Vec<[f64; 2]> = features
                .log
                .iter()
                .map(|row| [row[plot.feature_a], row[plot.feature_b]])
                .collect();
            let p = ForestParams {
                seed: rng::derive(params.seed, &[i as u64]),
                ..*params
            };
            fit_score(&points, &p)
        })
        .collect::<Result<_, _>>()?;
    let weights = (0..features.len())
        .map(|node| std::array::from_fn(|plot| per_plot[plot][node]))
        .collect();
    Ok(FocusBipartite {
        window_index,
        nodes: features.nodes.clone(),
        weights,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FocusConfig {
    pub window_days: u32,
    pub overlap: f64,
    pub sketch_dim: usize,
    pub history: usize,
    pub plots_per_dim: usize,
    pub source_prob: f64,
    pub dest_prob: f64,
    pub n_trees: usize,
    pub max_samples: usize,
    pub seed: u64,
}

impl Default for FocusConfig {
    fn default() -> Self {
        Self {
            window_days: 14,
            overlap: 0.5,
            sketch_dim: 256,
            history: 4,
            plots_per_dim: 2,
            source_prob: 0.2,
            dest_prob: 0.2,
            n_trees: 100,
            max_samples: 256,
            seed: 0,
        }
    }
}

impl FocusConfig {
    pub fn forest(&self) -> ForestParams {
        ForestParams {
            n_trees: self.n_trees,
            max_samples: self.max_samples,
            seed: rng::derive(self.seed, &[rng::stream::FOREST]),
        }
    }

    pub fn sketch(&self) -> SketchConfig {
        SketchConfig {
            dim: self.sketch_dim,
            plots_per_dim: self.plots_per_dim,
            source_prob: self.source_prob,
            dest_prob: self.dest_prob,
            seed: rng::derive(self.seed, &[rng::stream::SKETCH]),
        }
    }
}

/// Everything produced by [`run_focus`].
#[derive(Debug, Clone)]
pub struct FocusOutput {
    pub windows: Vec<(i64, i64)>,
    pub features: Vec<NodeFeatureTable>,
    pub bipartites: Vec<FocusBipartite>,
    pub spec: SketchSpec,
    pub sketches: SketchMatrix,
    pub report: ChangeReport,
    pub explanation: Explanation,
}

/// Window bounds, node features and bipartite graph per window.
pub type WindowGraphs = (Vec<(i64, i64)>, Vec<NodeFeatureTable>, Vec<FocusBipartite>);

/// Per-window features and bipartite graphs; windows with fewer than two
/// active nodes are kept as empty graphs so that sketches stay aligned.
pub fn window_bipartites(log: &TransactionLog, cfg: &FocusConfig) -> Result<WindowGraphs, FocusError> {
    let snapshots = window_split(log, cfg.window_days, cfg.overlap)?;
    let forest = cfg.forest();
    let built: Vec<(NodeFeatureTable, FocusBipartite)> = snapshots
        .par_iter()
        .enumerate()
        .map(|(i, snap)| {
            let features = node_features(snap).unwrap_or_default();
            let bipartite = match build_bipartite(i, &features, &forest) {
                Ok(b) => b,
                Err(FocusError::TooFewNodes(n)) => {
                    log::warn!("window {i} skipped: {n} active node(s)");
                    FocusBipartite {
                        window_index: i,
                        ..Default::default()
                    }
                }
                Err(e) => return Err(e),
            };
            Ok((features, bipartite))
        })
        .collect::<Result<_, FocusError>>()?;
    let windows = snapshots.iter().map(|s| (s.window_start, s.window_end)).collect();
    let (features, bipartites) = built.into_iter().unzip();
    Ok((windows, features, bipartites))
}

/// Full attention-routing pipeline.
pub fn run_focus(log: &TransactionLog, cfg: &FocusConfig) -> Result<FocusOutput, FocusError> {
    let (windows, features, bipartites) = window_bipartites(log, cfg)?;
    if windows.len() <= cfg.history {
        return Err(FocusError::TooFewWindows {
            windows: windows.len(),
            history: cfg.history,
        });
    }
    let spec = make_sketch_spec(&bipartites, &cfg.sketch())?;
    let sketches = sketch_windows(&bipartites, &spec);
    let report = change_scores(&sketches, cfg.history)?;
    let explanation = explain(&report, &spec, &features, &windows, log);
    Ok(FocusOutput {
        windows,
        features,
        bipartites,
        spec,
        sketches,
        report,
        explanation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{node_features_for, GraphSnapshot};

    #[test]
    fn sixty_six_plots() {
        let plots = FocusPlot::all();
        assert_eq!(plots.len(), 66);
        assert!(plots.iter().all(|p| p.feature_a < p.feature_b));
        assert_eq!(plots.iter().filter(|p| p.contains(3)).count(), 11);
    }

    #[test]
    fn identical_nodes_share_weights() {
        // a ring where every node has one in and one out edge of equal amount
        let edges = (0..20).map(|i| (i, (i + 1) % 20, 10.0)).collect();
        let snap = GraphSnapshot::new(0, 1, edges);
        let features = node_features(&snap).unwrap();
        let b = build_bipartite(0, &features, &ForestParams::default()).unwrap();
        assert_eq!(b.weights.len(), 20);
        for plot in 0..PLOT_COUNT {
            assert!(b.weights.iter().all(|w| w[plot] == b.weights[0][plot]));
        }
    }

    #[test]
    fn extreme_feature_drives_its_plots() {
        // identical ring nodes; node 0 is pushed far out on one feature only
        let edges = (0..40).map(|i| (i, (i + 1) % 40, 10.0)).collect();
        let snap = GraphSnapshot::new(0, 1, edges);
        let mut table = node_features_for(&snap, &(0..40).collect::<Vec<_>>());
        let extreme = Feature::VarianceOutWeight.index();
        table.raw[0][extreme] = 1e12;
        table.log[0][extreme] = (1.0 + 1e12f64).log10();
        let b = build_bipartite(0, &table, &ForestParams::default()).unwrap();
        let mut strictly_top = Vec::new();
        for (p, plot) in FocusPlot::all().iter().enumerate() {
            let mine = b.weights[0][p];
            if b.weights[1..].iter().all(|w| w[p] < mine) {
                strictly_top.push(p);
            }
            assert_eq!(strictly_top.contains(&p), plot.contains(extreme), "{:?}", plot.names());
        }
        assert_eq!(strictly_top.len(), 11);
    }

    #[test]
    fn too_few_nodes() {
        let snap = GraphSnapshot::new(0, 1, vec![(0, 0, 1.0)]);
        let features = node_features(&snap).unwrap();
        assert!(matches!(
            build_bipartite(0, &features, &ForestParams::default()),
            Err(FocusError::TooFewNodes(1))
        ));
    }
}
