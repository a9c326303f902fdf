use nalgebra::DMatrix;
use proptest::prelude::*;
use wmmtree::estimate::{
    analytic_path_moments, dirichlet_path_betas, estimate_from_matrix, min_variance_weights,
    two_stage_estimate, wmm_estimate, AlternateSources, EstimateConfig, EstimateError, IntervalType,
    SampleMatrix, DEFAULT_COMBINATION_CAP,
};
use wmmtree::sampling::SamplingError;
use wmmtree::tree::{build_tree, parse_edge_table, path_to_leaf, EdgeRecord, PopTree};

fn example_tree() -> PopTree {
    let file = std::fs::File::open(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/example_tree.csv")).unwrap();
    build_tree(&parse_edge_table(file).unwrap()).unwrap()
}

#[test]
fn example_tree_runs_end_to_end() {
    let report = wmm_estimate(&example_tree(), &EstimateConfig::new(15, 7)).unwrap();
    assert_eq!(report.log_estimates.len(), 15);
    assert_eq!(report.weights.keys().collect::<Vec<_>>(), ["B", "D"]);
    assert!((report.weights.values().sum::<f64>() - 1.0).abs() < 1e-9);
    assert!(report.root_estimate > 0.0);
    assert_eq!(report.per_edge.len(), 5);
}

#[test]
fn intervals_contain_their_centres() {
    let tree = build_tree(&[
        EdgeRecord::new("Z", "A").survey(30, 100).count(300),
        EdgeRecord::new("Z", "B").survey(60, 100),
        EdgeRecord::new("B", "C").survey(8, 10).count(500),
        EdgeRecord::new("B", "D").survey(2, 10),
    ])
    .unwrap();
    for kind in [IntervalType::Percentile, IntervalType::Var, IntervalType::Cox] {
        let report = wmm_estimate(&tree, &EstimateConfig::new(3000, 1).interval(kind)).unwrap();
        let theta = &report.log_estimates;
        let n = theta.len() as f64;
        let mean = theta.iter().sum::<f64>() / n;
        let s2 = theta.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let centre = match kind {
            IntervalType::Cox => (mean + s2 / 2.0).exp(),
            _ => report.root_estimate,
        };
        let [lo, hi] = report.uncertainty;
        assert!(lo <= centre && centre <= hi, "{kind}: {lo} {centre} {hi}");
    }
}

/// High-concentration surveys keep every path estimate within a few percent
/// of its mean, so the geometric combination sits close to the product of
/// the analytic means raised to the weights.
#[test]
fn dirichlet_tree_matches_weighted_analytic_value() {
    let tree = build_tree(&[
        EdgeRecord::new("Z", "A").survey(1500, 2000),
        EdgeRecord::new("Z", "B").survey(500, 2000).count(250),
        EdgeRecord::new("A", "C").survey(900, 1000).count(675),
        EdgeRecord::new("A", "D").survey(100, 1000).count(75),
    ])
    .unwrap();
    let report = wmm_estimate(&tree, &EstimateConfig::new(100_000, 3)).unwrap();
    let log_target: f64 = report
        .weights
        .iter()
        .map(|(leaf, w)| {
            let betas = dirichlet_path_betas(&tree, leaf).unwrap();
            let m = analytic_path_moments(&path_to_leaf(&tree, leaf).unwrap(), &betas).unwrap();
            w * m.mean.unwrap().ln()
        })
        .sum();
    let target = log_target.exp();
    assert!(((report.root_estimate - target) / target).abs() < 0.01, "{} vs {target}", report.root_estimate);
}

#[test]
fn identical_alternate_source_agrees_with_single_source() {
    let tree = build_tree(&[
        EdgeRecord::new("Z", "A").survey(30, 100).count(300),
        EdgeRecord::new("Z", "B").survey(70, 100).count(700),
    ])
    .unwrap();
    let config = EstimateConfig::new(100_000, 11);
    let single = wmm_estimate(&tree, &config).unwrap();
    let mut alt = AlternateSources::new();
    alt.add("Z", "A", 30, 100);
    let staged = two_stage_estimate(&tree, &alt, &config, DEFAULT_COMBINATION_CAP).unwrap();
    assert_eq!(staged.stage_two.as_ref().unwrap().combinations.len(), 2);
    let gap = (staged.root_estimate - single.root_estimate).abs() / single.root_estimate;
    assert!(gap < 0.01, "{gap}");
}

#[test]
fn rejection_exhaustion_is_an_estimation_error() {
    let tree = build_tree(&[
        EdgeRecord::new("Z", "A").survey(99, 100).count(10),
        EdgeRecord::new("Z", "B").survey(49, 50),
        EdgeRecord::new("Z", "C"),
    ])
    .unwrap();
    let mut config = EstimateConfig::new(10, 1);
    config.max_attempts = 5;
    let err = wmm_estimate(&tree, &config).unwrap_err();
    assert!(matches!(err.root_cause(), EstimateError::Sampling(SamplingError::Exhausted { .. })), "{err}");
}

fn matrices() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
    (3usize..40, 1usize..5).prop_flat_map(|(m, k)| {
        (Just(m), Just(k), proptest::collection::vec(1.0f64..1000.0, m * k))
    })
}

proptest! {
    #[test]
    fn weights_sum_to_one((m, k, values) in matrices()) {
        let leaves: Vec<String> = (0..k).map(|j| format!("L{j}")).collect();
        let matrix = SampleMatrix::new(leaves, DMatrix::from_row_slice(m, k, &values), vec![1.0; m]).unwrap();
        let w = min_variance_weights(&matrix);
        prop_assert!(w.weights.iter().all(|v| v.is_finite()));
        prop_assert!((w.sum() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn scaling_rows_scales_the_estimate((m, k, values) in matrices(), c in 0.01f64..100.0) {
        let leaves: Vec<String> = (0..k).map(|j| format!("L{j}")).collect();
        let base = DMatrix::from_row_slice(m, k, &values);
        let a = SampleMatrix::new(leaves.clone(), base.clone(), vec![1.0; m]).unwrap();
        let b = SampleMatrix::new(leaves, base * c, vec![1.0; m]).unwrap();
        let ea = estimate_from_matrix(&a, IntervalType::Percentile, 0.05).unwrap();
        let eb = estimate_from_matrix(&b, IntervalType::Percentile, 0.05).unwrap();
        prop_assert!((eb.log_root - ea.log_root - c.ln()).abs() < 1e-8);
        prop_assert!((eb.root_estimate / ea.root_estimate / c - 1.0).abs() < 1e-8);
    }

    #[test]
    fn permuting_columns_permutes_weights((m, k, values) in matrices(), rotate in 0usize..5) {
        let leaves: Vec<String> = (0..k).map(|j| format!("L{j}")).collect();
        let base = DMatrix::from_row_slice(m, k, &values);
        let r = rotate % k;
        let order: Vec<usize> = (0..k).map(|j| (j + r) % k).collect();
        let permuted = DMatrix::from_fn(m, k, |i, j| base[(i, order[j])]);
        let permuted_leaves: Vec<String> = order.iter().map(|&j| leaves[j].clone()).collect();
        let a = min_variance_weights(&SampleMatrix::new(leaves, base, vec![1.0; m]).unwrap());
        let b = min_variance_weights(&SampleMatrix::new(permuted_leaves, permuted, vec![1.0; m]).unwrap());
        for leaf in &a.leaves {
            prop_assert!((a.get(leaf).unwrap() - b.get(leaf).unwrap()).abs() < 1e-6);
        }
    }

    #[test]
    fn percentile_endpoints_are_ordered((m, k, values) in matrices(), alpha in 0.01f64..0.5) {
        let leaves: Vec<String> = (0..k).map(|j| format!("L{j}")).collect();
        let matrix = SampleMatrix::new(leaves, DMatrix::from_row_slice(m, k, &values), vec![1.0; m]).unwrap();
        let e = estimate_from_matrix(&matrix, IntervalType::Percentile, alpha).unwrap();
        let wide = estimate_from_matrix(&matrix, IntervalType::Percentile, alpha / 2.0).unwrap();
        prop_assert!(e.interval.0 <= e.interval.1);
        prop_assert!(wide.interval.0 <= e.interval.0 + 1e-9 && e.interval.1 <= wide.interval.1 + 1e-9);
    }
}
