mod common;

use ledgerscope::anomaly::{fit_score, ForestParams};
use ledgerscope::focus::{
    change_scores, make_sketch_spec, principal_direction, sketch_windows, FocusBipartite, SketchConfig, SketchMatrix,
};
use proptest::prelude::*;

fn config(dim: usize, seed: u64) -> SketchConfig {
    SketchConfig {
        dim,
        plots_per_dim: 2,
        source_prob: 0.3,
        dest_prob: 0.2,
        seed,
    }
}

/// Dominant right singular vector by plain power iteration on `HᵀH`.
fn power_iteration(rows: &[Vec<f64>]) -> Vec<f64> {
    let l = rows[0].len();
    let mut x = vec![1.0; l];
    for _ in 0..5000 {
        let hx: Vec<f64> = rows
            .iter()
            .map(|r| r.iter().zip(&x).map(|(a, b)| a * b).sum())
            .collect();
        let mut y = vec![0.0; l];
        for (r, s) in rows.iter().zip(&hx) {
            y.iter_mut().zip(r).for_each(|(yi, ri)| *yi += ri * s);
        }
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        x = y.into_iter().map(|v| v / norm).collect();
    }
    if x.iter().sum::<f64>() < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
    x
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sketch_entries_bounded(seed in any::<u64>(), windows in 1usize..6, universe in 2usize..30) {
        let bip = common::random_bipartites(seed, windows, universe);
        prop_assume!(bip.iter().any(|b| !b.nodes.is_empty()));
        let spec = make_sketch_spec(&bip, &config(16, seed)).unwrap();
        let k = sketch_windows(&bip, &spec);
        prop_assert_eq!(k.rows.len(), windows);
        for row in &k.rows {
            for (j, &x) in row.iter().enumerate() {
                prop_assert!(x >= 0.0 && x <= spec.sources[j].len() as f64 + 1e-12);
            }
        }
        for (v, d) in spec.selected_plots.iter().zip(&spec.sampled_plots) {
            prop_assert!(v.iter().all(|p| d.contains(p)));
        }
    }

    #[test]
    fn greedy_gains_diminish(seed in any::<u64>()) {
        let (totals, plots) = common::random_plot_instance(seed);
        let refs: Vec<_> = totals.iter().collect();
        let (chosen, gains) = ledgerscope::focus::greedy_plots(&refs, &plots, plots.len());
        prop_assert_eq!(chosen.len(), plots.len());
        for w in gains.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
        prop_assert!(common::greedy_first_matches(&totals, &plots));
    }

    #[test]
    fn repeated_window_scores_zero(seed in any::<u64>(), copies in 5usize..9) {
        let one = common::random_bipartites(seed, 1, 20).pop().unwrap();
        prop_assume!(!one.nodes.is_empty());
        let bip: Vec<FocusBipartite> = (0..copies)
            .map(|w| FocusBipartite { window_index: w, ..one.clone() })
            .collect();
        let spec = make_sketch_spec(&bip, &config(32, seed)).unwrap();
        let report = change_scores(&sketch_windows(&bip, &spec), 4).unwrap();
        for s in report.scores.iter().flatten() {
            prop_assert!(*s < 1e-10, "score {}", s);
        }
    }

    #[test]
    fn scores_in_unit_interval(rows in prop::collection::vec(prop::collection::vec(0.0f64..10.0, 8), 6..12)) {
        let report = change_scores(&SketchMatrix { rows }, 3).unwrap();
        for s in report.scores.iter().flatten() {
            prop_assert!((0.0..=1.0).contains(s));
        }
    }

    #[test]
    fn principal_direction_matches_power_iteration(
        rows in prop::collection::vec(prop::collection::vec(0.01f64..1.0, 24), 2..6),
    ) {
        let e = principal_direction(&rows).unwrap();
        let p = power_iteration(&rows);
        for (a, b) in e.iter().zip(&p) {
            prop_assert!((a - b).abs() < 1e-8, "{} vs {}", a, b);
        }
    }

    #[test]
    fn forest_is_permutation_equivariant(
        points in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 2..300),
        seed in any::<u64>(),
        shift in 1usize..300,
    ) {
        let points: Vec<[f64; 2]> = points.into_iter().map(|(x, y)| [x, y]).collect();
        let params = ForestParams { n_trees: 25, max_samples: 64, seed };
        let base = fit_score(&points, &params).unwrap();
        let mut rotated = points.clone();
        let shift = shift % points.len();
        rotated.rotate_left(shift);
        let moved = fit_score(&rotated, &params).unwrap();
        for (i, s) in base.iter().enumerate() {
            let j = (i + points.len() - shift) % points.len();
            prop_assert_eq!(*s, moved[j]);
            prop_assert!((0.0..=1.0).contains(s));
        }
    }
}

#[test]
fn greedy_first_pick_is_exhaustive_argmax() {
    for seed in 0..50 {
        let (totals, plots) = common::random_plot_instance(seed);
        assert!(common::greedy_first_matches(&totals, &plots), "seed {seed}");
    }
}

#[test]
fn far_point_never_less_anomalous() {
    // a fixed cluster plus one probe moved outward; mean score over seeds
    let cluster: Vec<[f64; 2]> = (0..60).map(|i| [(i % 8) as f64 * 0.1, (i / 8) as f64 * 0.1]).collect();
    let mean_score = |dist: f64| {
        (0..20)
            .map(|seed| {
                let mut pts = cluster.clone();
                pts.push([dist, dist]);
                fit_score(
                    &pts,
                    &ForestParams {
                        seed,
                        ..ForestParams::default()
                    },
                )
                .unwrap()[60]
            })
            .sum::<f64>()
            / 20.0
    };
    let scores: Vec<f64> = [1.0, 2.0, 5.0, 20.0, 100.0].iter().map(|&d| mean_score(d)).collect();
    for w in scores.windows(2) {
        assert!(w[1] >= w[0] - 1e-3, "{scores:?}");
    }
}
