mod common;

use common::oracles::{check_plan_shape, naive_moments};
use cyclecast::dataset::{generate_synthetic, SyntheticConfig};
use cyclecast::evaluation::{
    cross_validate, expanding_splits, mae, period_breakdown, residual_stats, rmse, EvalError, Metrics, Period,
};
use cyclecast::gbtree::HyperParams;
use cyclecast::FeatureSpec;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[test]
fn random_plans_satisfy_expanding_window_shape() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut built, mut refused) = (0, 0);
    for _ in 0..1000 {
        let n = rng.random_range(0..5000);
        let k = rng.random_range(1..12);
        let delta = rng.random_range(1..600);
        match expanding_splits(n, k, delta) {
            Ok(plan) => {
                built += 1;
                plan.validate().unwrap();
                let folds: Vec<_> = plan.folds.iter().map(|f| (f.train.clone(), f.val.clone())).collect();
                check_plan_shape(n, k, delta, &folds).unwrap_or_else(|e| panic!("n={n} k={k} delta={delta}: {e}"));
            }
            Err(EvalError::InsufficientRows { .. }) => {
                refused += 1;
                assert!(n < (k + 1) * delta, "n={n} k={k} delta={delta} refused");
            }
            Err(e) => panic!("unexpected error {e}"),
        }
    }
    assert!(built > 200 && refused > 100, "built {built}, refused {refused}");
}

#[test]
fn residual_moments_match_naive_passes() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for case in 0..200 {
        let n = rng.random_range(4..2000);
        let shift = rng.random_range(-50.0..50.0);
        let r: Vec<f64> = (0..n)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                shift + z * z * z.signum() * 0.7
            })
            .collect();
        let s = residual_stats(&r).unwrap();
        let (mean, std, skew, kurt) = naive_moments(&r);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs().max(1.0);
        assert!(close(s.mean, mean), "case {case} mean");
        assert!(close(s.std, std), "case {case} std");
        assert!(close(s.skewness.unwrap(), skew), "case {case} skewness");
        assert!(close(s.kurtosis.unwrap(), kurt), "case {case} kurtosis");
    }
}

#[test]
fn normal_sample_has_raw_kurtosis_three() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let r: Vec<f64> = (0..100_000).map(|_| rng.sample(StandardNormal)).collect();
    let s = residual_stats(&r).unwrap();
    let k = s.kurtosis.unwrap();
    assert!((k - 3.0).abs() < 0.1, "kurtosis {k}");
    assert!(s.skewness.unwrap().abs() < 0.05);
}

#[test]
fn cross_validation_on_a_small_series() {
    let frame = generate_synthetic(&SyntheticConfig {
        n_hours: 900,
        ..SyntheticConfig::default()
    })
    .unwrap();
    let params = HyperParams {
        n_estimators: 30,
        ..HyperParams::default()
    };
    let spec = FeatureSpec::default();
    let cv = cross_validate(&frame, &spec, &params, 3, 100).unwrap();
    assert_eq!(cv.fold_metrics.len(), 3);
    assert!(cv.fold_metrics.iter().all(|m| m.n == 100));
    let mean = cv.fold_metrics.iter().map(|m| m.rmse).sum::<f64>() / 3.0;
    assert!((cv.cv_score - mean).abs() < 1e-15);
    assert!((cv.stability - cv.dispersion / cv.cv_score).abs() < 1e-15);
    assert_eq!(cv, cross_validate(&frame, &spec, &params, 3, 100).unwrap());

    // a fold whose training rows all fall inside the feature warm-up is refused
    assert!(cross_validate(&frame, &spec, &params, 10, 74).is_err());
}

proptest! {
    #[test]
    fn rmse_bounds(pairs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 1..200)) {
        let (y, p): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let r = rmse(&y, &p).unwrap();
        let a = mae(&y, &p).unwrap();
        let max = y.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(a <= r * (1.0 + 1e-12) + 1e-12);
        prop_assert!(r <= max * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn period_rows_partition_the_input(hours in prop::collection::vec(0u32..24, 1..300)) {
        let y: Vec<f64> = hours.iter().map(|h| *h as f64 + 1.0).collect();
        let p: Vec<f64> = y.iter().map(|v| v * 1.1).collect();
        let blocks = period_breakdown(&y, &p, &hours).unwrap();
        prop_assert_eq!(blocks.iter().map(|b| b.period).collect::<Vec<_>>(), Period::ALL.to_vec());
        prop_assert_eq!(blocks.iter().map(|b| b.n).sum::<usize>(), hours.len());
        for b in &blocks {
            prop_assert_eq!(b.metrics.is_some(), b.n > 0);
            if let Some(m) = &b.metrics {
                let expected: Vec<(f64, f64)> = hours
                    .iter()
                    .zip(y.iter().zip(&p))
                    .filter(|(h, _)| Period::of_hour(**h).unwrap() == b.period)
                    .map(|(_, (a, b))| (*a, *b))
                    .collect();
                let (ey, ep): (Vec<f64>, Vec<f64>) = expected.into_iter().unzip();
                prop_assert_eq!(m, &Metrics::compute(&ey, &ep).unwrap());
            }
        }
    }
}
