mod common;

use common::oracles::sphere;
use cyclecast::tuner::{
    expected_improvement, gp_fit, gp_fit_fixed, optimize, random_search, Dimension, GpHyper, OptimizerConfig,
    ParamSpace, TrialSource,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn square(d: usize) -> ParamSpace {
    ParamSpace::new((0..d).map(|j| Dimension::linear(&format!("x{j}"), -5.0, 5.0)).collect()).unwrap()
}

fn bowl(u: &[f64]) -> f64 {
    u.iter().map(|v| (v - 0.3) * (v - 0.3)).sum::<f64>() + 0.5 * u[0] * u[1]
}

fn design(m: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..m).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect()
}

fn sphere_run(seed: u64) -> (f64, f64) {
    let space = square(2);
    let cfg = OptimizerConfig::new(50, 10, seed);
    let bo = optimize(&space, |x| Ok(sphere(x)), &cfg, |_| {}).unwrap();
    let rs = random_search(&space, |x| Ok(sphere(x)), 50, seed, |_| {}).unwrap();
    (bo.best_objective, rs.best_objective)
}

#[test]
fn gp_predicts_a_held_out_quadratic() {
    let xs = design(40, 1);
    let ys: Vec<f64> = xs.iter().map(|x| bowl(x)).collect();
    let gp = gp_fit(&xs, &ys, 7).unwrap();
    let test = design(50, 2);
    let mse = test.iter().map(|x| (gp.posterior(x).0 - bowl(x)).powi(2)).sum::<f64>() / test.len() as f64;
    let var = {
        let m = ys.iter().sum::<f64>() / ys.len() as f64;
        ys.iter().map(|y| (y - m).powi(2)).sum::<f64>() / ys.len() as f64
    };
    assert!(mse < 0.01 * var, "mse {mse} vs variance {var}");
}

#[test]
fn posterior_reverts_to_the_prior_far_away() {
    let xs = design(15, 3);
    let ys: Vec<f64> = xs.iter().map(|x| bowl(x)).collect();
    let gp = gp_fit(&xs, &ys, 1).unwrap();
    let (mu, sigma) = gp.posterior(&[40.0, -40.0]);
    assert!((mu - gp.prior_mean()).abs() < 1e-6 * gp.prior_std().max(1.0));
    let prior_sd = gp.prior_std();
    assert!(
        sigma <= prior_sd * (1.0 + 1e-9) && sigma >= 0.99 * prior_sd,
        "{sigma} vs {prior_sd}"
    );
}

#[test]
fn uncertainty_between_observations_is_below_the_prior() {
    let xs = vec![vec![0.2, 0.5], vec![0.4, 0.5]];
    let ys = vec![1.0, 2.0];
    let gp = gp_fit_fixed(&xs, &ys, GpHyper::isotropic(2, 0.3, 1.0, 1e-6)).unwrap();
    let (_, mid) = gp.posterior(&[0.3, 0.5]);
    let (_, far) = gp.posterior(&[0.95, 0.05]);
    assert!(mid < far, "{mid} vs {far}");
    assert!(mid < gp.prior_std());
    for (x, y) in xs.iter().zip(&ys) {
        let (m, s) = gp.posterior(x);
        assert!((m - y).abs() < 1e-3 && s < 0.01 * gp.prior_std());
    }
}

#[test]
fn sphere_is_solved_within_budget() {
    let mut hits = 0;
    let mut report = Vec::new();
    for seed in 0..10 {
        let (bo, _) = sphere_run(seed);
        report.push(bo);
        if bo <= 0.1 {
            hits += 1;
        }
    }
    assert!(hits >= 9, "incumbents {report:?}");
}

#[test]
fn optimizer_beats_random_search_on_the_sphere() {
    let runs: Vec<(f64, f64)> = (100..110).map(sphere_run).collect();
    let wins = runs.iter().filter(|(bo, rs)| bo < rs).count();
    let median = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        0.5 * (v[4] + v[5])
    };
    let (bo, rs): (Vec<f64>, Vec<f64>) = runs.iter().copied().unzip();
    assert!(wins >= 8, "{runs:?}");
    assert!(median(bo) < median(rs));
}

#[test]
fn trial_history_is_deterministic_and_monotone() {
    let space = square(3);
    let mut cfg = OptimizerConfig::new(16, 5, 9);
    cfg.seeded_points = vec![vec![1.0, 1.0, 1.0]];
    let run = || optimize(&space, |x| Ok(sphere(x)), &cfg, |_| {}).unwrap();
    let (a, b) = (run(), run());
    let untimed = |r: &cyclecast::tuner::OptimizeResult| {
        r.trials
            .iter()
            .map(|t| (t.point.clone(), t.objective, t.source))
            .collect::<Vec<_>>()
    };
    assert_eq!(untimed(&a), untimed(&b));
    assert_eq!(a.trials.len(), 16);
    assert_eq!(a.trials[0].source, TrialSource::Seeded);
    assert!(a.trials[1..5].iter().all(|t| t.source == TrialSource::Initial));
    assert!(a.trials[5..].iter().all(|t| t.source == TrialSource::Acquisition));
    let trace: Vec<f64> = a.incumbent_trace.iter().map(|v| v.unwrap()).collect();
    assert!(trace.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(*trace.last().unwrap(), a.best_objective);
    assert!(a.best_objective <= 3.0);
}

#[test]
fn failed_trials_do_not_stop_the_search() {
    let space = square(2);
    let cfg = OptimizerConfig::new(20, 4, 3);
    let mut calls = 0;
    let res = optimize(
        &space,
        |x| {
            calls += 1;
            if x[0] > 2.0 {
                Err("region unavailable".into())
            } else {
                Ok(sphere(x))
            }
        },
        &cfg,
        |_| {},
    )
    .unwrap();
    assert_eq!(calls, 20);
    assert_eq!(res.trials.len(), 20);
    assert!(res
        .trials
        .iter()
        .filter(|t| t.objective.is_none())
        .all(|t| t.error.is_some()));
    assert!(res.best_point["x0"] <= 2.0);
}

proptest! {
    #[test]
    fn ei_is_non_negative(mu in -1e3f64..1e3, sigma in 0.0f64..1e3, best in -1e3f64..1e3) {
        let ei = expected_improvement(mu, sigma, best);
        prop_assert!(ei >= 0.0 && ei.is_finite());
        if sigma == 0.0 && mu >= best {
            prop_assert_eq!(ei, 0.0);
        }
    }

    #[test]
    fn ei_grows_with_the_gap(mu in -10f64..10.0, sigma in 0.01f64..5.0, gap in 0.01f64..5.0) {
        prop_assert!(expected_improvement(mu - gap, sigma, mu) > expected_improvement(mu, sigma, mu));
    }

    #[test]
    fn single_observation_is_interpolated(x in prop::collection::vec(0.0f64..1.0, 1..6), y in -50.0f64..50.0) {
        let d = x.len();
        let gp = gp_fit_fixed(std::slice::from_ref(&x), &[y], GpHyper::isotropic(d, 0.5, 1.0, 1e-12)).unwrap();
        prop_assert!((gp.posterior(&x).0 - y).abs() < 1e-8);
    }
}
