mod common;

use common::oracles::{exhaustive_stump, random_stump_instance};
use cyclecast::gbtree::{
    fit, goss_sample, should_stop, squared_loss_grad_hess, GbtModel, GossParams, GrowthPolicy, HyperParams, Node,
    StopReason,
};
use cyclecast::FeatureMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn stump_params() -> HyperParams {
    HyperParams {
        learning_rate: 1.0,
        max_depth: 1,
        n_estimators: 1,
        min_child_weight: 1.0,
        subsample: 1.0,
        colsample_bytree: 1.0,
        lambda: 0.0,
        gamma: 0.0,
        goss: None,
        ..HyperParams::default()
    }
}

fn matrix(columns: Vec<Vec<f64>>, y: Vec<f64>) -> FeatureMatrix {
    let names = (0..columns.len()).map(|j| format!("x{j}")).collect();
    FeatureMatrix::from_columns(names, columns, y).unwrap()
}

/// Smooth nonlinear regression problem with a few informative columns.
fn regression(n: usize, f: usize, seed: u64) -> FeatureMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let columns: Vec<Vec<f64>> = (0..f)
        .map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let y = (0..n)
        .map(|i| {
            let z: f64 = rng.sample(StandardNormal);
            columns[0][i].sin() + 0.5 * columns[1 % f][i].powi(2) + 0.1 * z
        })
        .collect();
    matrix(columns, y)
}

#[test]
fn depth_one_tree_matches_exhaustive_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut with_split = 0;
    for case in 0..50 {
        let inst = random_stump_instance(&mut rng);
        let x = matrix(inst.columns.clone(), inst.y.clone());
        let (model, _) = fit(&x, &stump_params(), None).unwrap();
        assert_eq!(model.base_score, 0.0, "case {case}");
        let tree = &model.trees[0];
        match (exhaustive_stump(&inst), &tree.nodes[0]) {
            (None, Node::Leaf { weight }) => assert_eq!(*weight, 0.0, "case {case}"),
            (
                Some(s),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                },
            ) => {
                with_split += 1;
                assert_eq!(*feature, s.feature, "case {case}");
                let routed: Vec<bool> = inst.columns[*feature].iter().map(|v| v <= threshold).collect();
                assert_eq!(routed, s.goes_left, "case {case}");
                assert_eq!(tree.nodes[*left], Node::Leaf { weight: s.left_weight }, "case {case}");
                assert_eq!(tree.nodes[*right], Node::Leaf { weight: s.right_weight }, "case {case}");
            }
            (oracle, root) => panic!("case {case}: oracle {oracle:?} vs root {root:?}"),
        }
    }
    assert!(with_split > 40, "only {with_split} instances produced a split");
}

#[test]
fn gradients_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let loss = |p: f64, y: f64| 0.5 * (p - y) * (p - y);
    let (ys, ps): (Vec<f64>, Vec<f64>) = (0..1000)
        .map(|_| (rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)))
        .unzip();
    let (g, h) = squared_loss_grad_hess(&ys, &ps).unwrap();
    let eps = 1e-4;
    for i in 0..ys.len() {
        let (p, y) = (ps[i], ys[i]);
        let fd = (loss(p + eps, y) - loss(p - eps, y)) / (2.0 * eps);
        assert!((fd - g[i]).abs() < 1e-6, "gradient at {i}: {fd} vs {}", g[i]);
        let fd2 = (loss(p + eps, y) - 2.0 * loss(p, y) + loss(p - eps, y)) / (eps * eps);
        assert!((fd2 - h[i]).abs() < 1e-3, "hessian at {i}: {fd2} vs {}", h[i]);
    }
}

#[test]
fn goss_weighted_gradient_sum_is_unbiased() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g: Vec<f64> = (0..100).map(|_| rng.sample(StandardNormal)).collect();
    let truth: f64 = g.iter().sum();
    let sums: Vec<f64> = (0..10_000u64)
        .map(|seed| {
            let s = goss_sample(&g, 0.2, 0.2, seed).unwrap();
            s.indices.iter().zip(&s.weights).map(|(&i, w)| w * g[i]).sum()
        })
        .collect();
    let n = sums.len() as f64;
    let mean = sums.iter().sum::<f64>() / n;
    let sd = (sums.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let se = sd / n.sqrt();
    assert!(se > 0.0);
    assert!((mean - truth).abs() <= 3.0 * se, "mean {mean}, truth {truth}, se {se}");
}

#[test]
fn training_loss_never_increases_without_sampling() {
    let x = regression(400, 4, 1);
    for growth in [GrowthPolicy::DepthWise, GrowthPolicy::LeafWise { num_leaves: 8 }] {
        let params = HyperParams {
            n_estimators: 60,
            max_depth: 4,
            growth,
            ..HyperParams::default()
        };
        let (_, log) = fit(&x, &params, None).unwrap();
        assert_eq!(log.train_rmse.len(), 60);
        for w in log.train_rmse.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{growth:?}: {} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn early_stopping_replays_from_the_log() {
    let full = regression(600, 3, 2);
    let train = full.select_rows(0..300);
    let valid = full.select_rows(300..600);
    let params = HyperParams {
        learning_rate: 0.3,
        max_depth: 8,
        min_child_weight: 0.0,
        lambda: 0.0,
        n_estimators: 500,
        patience: 10,
        ..HyperParams::default()
    };
    let (model, log) = fit(&train, &params, Some(&valid)).unwrap();
    assert_eq!(log.stop_reason, StopReason::EarlyStopping);
    let t = log.val_rmse.len();
    assert!(t < 500);
    assert!(should_stop(&log.val_rmse, params.patience));
    assert!((1..t).all(|s| !should_stop(&log.val_rmse[..s], params.patience)));

    let best = log
        .val_rmse
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |b, (i, &v)| if v < b.1 { (i, v) } else { b });
    assert_eq!(log.best_iteration, best.0 + 1);
    assert_eq!(model.trees.len(), log.best_iteration);
    assert_eq!(model.best_iteration, log.best_iteration);

    let pred = model.predict(&valid).unwrap();
    let rmse = (pred
        .iter()
        .zip(&valid.target)
        .map(|(p, y)| (p - y).powi(2))
        .sum::<f64>()
        / 300.0)
        .sqrt();
    assert!((rmse - best.1).abs() < 1e-12, "{rmse} vs {}", best.1);
}

#[test]
fn sampled_training_is_deterministic_per_seed() {
    let x = regression(500, 5, 4);
    let mut params = HyperParams::lgbm_style();
    params.n_estimators = 40;
    params.min_child_weight = 1.0;
    let a = fit(&x, &params, None).unwrap();
    let b = fit(&x, &params, None).unwrap();
    assert_eq!(a.0, b.0);
    assert_eq!(a.1.train_rmse, b.1.train_rmse);

    let mut bagged = HyperParams::xgb_style();
    bagged.n_estimators = 40;
    bagged.colsample_bytree = 0.6;
    assert_eq!(fit(&x, &bagged, None).unwrap().0, fit(&x, &bagged, None).unwrap().0);
    let other = HyperParams {
        seed: 43,
        ..bagged.clone()
    };
    assert_ne!(fit(&x, &bagged, None).unwrap().0, fit(&x, &other, None).unwrap().0);
}

#[test]
fn model_json_round_trip_is_bit_exact() {
    let x = regression(300, 3, 5);
    let params = HyperParams {
        n_estimators: 30,
        goss: Some(GossParams {
            top_rate: 0.3,
            other_rate: 0.2,
        }),
        ..HyperParams::default()
    };
    let (model, log) = fit(&x, &params, None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    model.save(&path).unwrap();
    let back = GbtModel::load(&path).unwrap();
    assert_eq!(back, model);
    let pred = back.predict(&x).unwrap();
    assert!(pred
        .iter()
        .zip(&log.train_predictions)
        .all(|(a, b)| a.to_bits() == b.to_bits()));
}

#[test]
fn future_format_version_is_rejected() {
    let x = regression(50, 2, 6);
    let (model, _) = fit(
        &x,
        &HyperParams {
            n_estimators: 2,
            ..HyperParams::default()
        },
        None,
    )
    .unwrap();
    let text = model
        .to_json()
        .replacen("\"format_version\":1", "\"format_version\":99", 1);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    std::fs::write(&path, text).unwrap();
    assert!(GbtModel::load(&path).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prediction_is_base_plus_shrunk_leaves(seed in 0u64..1000, depth in 1usize..5, eta in 0.05f64..1.0) {
        let x = regression(120, 3, seed);
        let params = HyperParams { n_estimators: 8, max_depth: depth, learning_rate: eta, ..HyperParams::default() };
        let (model, _) = fit(&x, &params, None).unwrap();
        let pred = model.predict(&x).unwrap();
        for (i, p) in pred.iter().enumerate().step_by(7) {
            let mut acc = model.base_score;
            for t in &model.trees {
                acc += eta * t.leaf_for_row(&x.columns, i);
            }
            prop_assert_eq!(acc.to_bits(), p.to_bits());
        }
        for t in &model.trees {
            prop_assert!(t.depth() <= depth);
        }
    }

    #[test]
    fn importance_shares_sum_to_one(seed in 0u64..1000) {
        let x = regression(150, 4, seed);
        let (model, _) = fit(&x, &HyperParams { n_estimators: 10, ..HyperParams::default() }, None).unwrap();
        let fi = cyclecast::gbtree::feature_importance(&model);
        prop_assert!(!fi.no_splits);
        let total: f64 = fi.shares.values().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(fi.shares.values().all(|s| *s >= 0.0));
    }
}
