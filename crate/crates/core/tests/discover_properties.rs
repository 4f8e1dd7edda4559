use ledgerscope::discover::{kmeans, svd, MONTHS};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn rows_strategy() -> impl Strategy<Value = Vec<[f64; MONTHS]>> {
    prop::collection::vec(prop::array::uniform12(0.0f64..3.0), 12..40)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn singular_values_match_nalgebra(rows in rows_strategy()) {
        let ours = svd(&rows);
        let m = DMatrix::from_fn(rows.len(), MONTHS, |i, j| rows[i][j]);
        let mut theirs: Vec<f64> = m.svd(false, false).singular_values.iter().copied().collect();
        theirs.sort_by(|a, b| b.total_cmp(a));
        let top = theirs[0];
        for (a, b) in ours.singular_values.iter().zip(&theirs) {
            // the Gram route squares the conditioning, so compare against the top value
            prop_assert!((a - b).abs() <= 1e-7 * top, "{} vs {}", a, b);
        }
    }

    #[test]
    fn factors_reconstruct_the_matrix(rows in rows_strategy()) {
        let s = svd(&rows);
        let scale = rows.iter().flatten().fold(0.0f64, |a, b| a.max(b.abs())).max(1.0);
        for (i, row) in rows.iter().enumerate() {
            for (m, &want) in row.iter().enumerate() {
                let x: f64 = (0..MONTHS).map(|c| s.singular_values[c] * s.u[i][c] * s.v[c][m]).sum();
                prop_assert!((x - want).abs() < 1e-8 * scale, "({}, {}) {} vs {}", i, m, x, want);
            }
        }
        for a in 0..MONTHS {
            for b in 0..MONTHS {
                let d: f64 = (0..MONTHS).map(|m| s.v[a][m] * s.v[b][m]).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                prop_assert!((d - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn kmeans_objective_never_increases(
        points in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 5..120),
        k in 1usize..6,
        seed in any::<u64>(),
    ) {
        let points: Vec<[f64; 2]> = points.into_iter().map(|(x, y)| [x, y]).collect();
        let k = k.min(points.len());
        let fit = kmeans(&points, k, seed);
        for w in fit.objective_history.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12, "{:?}", fit.objective_history);
        }
        prop_assert_eq!(fit.assignment.len(), points.len());
        prop_assert!(fit.assignment.iter().all(|&c| c < k));
    }
}
