//! Brute-force reference implementations shared by the integration suites.
//!
//! Everything here is written for clarity over speed and avoids calling the
//! library code it is used to check.

#![allow(dead_code)]

use rand::Rng;

pub fn naive_mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn naive_sample_std(v: &[f64]) -> f64 {
    let m = naive_mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Mean and sample std of the `w` values ending at `t`, recomputed from scratch.
pub fn naive_window(series: &[f64], w: usize, t: usize) -> (f64, f64) {
    let win = &series[t + 1 - w..=t];
    (naive_mean(win), naive_sample_std(win))
}

/// Mean, sample std, skewness and raw kurtosis, one pass per moment.
pub fn naive_moments(r: &[f64]) -> (f64, f64, f64, f64) {
    let n = r.len() as f64;
    let mean = r.iter().sum::<f64>() / n;
    let m2 = r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m3 = r.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
    let m4 = r.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    let std = (m2 * n / (n - 1.0)).sqrt();
    (mean, std, m3 / m2.powf(1.5), m4 / (m2 * m2))
}

/// A depth-one regression instance whose targets are multiples of 1/8 summing
/// to zero, so every gradient sum is exact and ties are reproducible.
pub struct StumpInstance {
    pub columns: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

pub fn random_stump_instance(rng: &mut impl Rng) -> StumpInstance {
    let n = rng.random_range(2..=32);
    let f = rng.random_range(1..=3);
    let columns = (0..f)
        .map(|_| {
            if rng.random_bool(0.5) {
                (0..n).map(|_| rng.random_range(0..6) as f64).collect()
            } else {
                (0..n).map(|_| rng.random_range(-10.0..10.0)).collect()
            }
        })
        .collect();
    let mut y: Vec<f64> = (0..n).map(|_| rng.random_range(-32..=32) as f64 / 8.0).collect();
    let s: f64 = y[..n - 1].iter().sum();
    y[n - 1] = -s;
    StumpInstance { columns, y }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stump {
    pub feature: usize,
    /// `goes_left[i]` for every row.
    pub goes_left: Vec<bool>,
    pub left_weight: f64,
    pub right_weight: f64,
}

/// Best single split under squared loss at prediction `mean(y)` with
/// `lambda = gamma = 0`, by trying every feature and every cut between
/// distinct values. Ties go to the lowest feature, then the lowest cut.
/// `None` when no split has positive gain.
pub fn exhaustive_stump(inst: &StumpInstance) -> Option<Stump> {
    let n = inst.y.len();
    let base = inst.y.iter().sum::<f64>() / n as f64;
    let g: Vec<f64> = inst.y.iter().map(|y| base - y).collect();
    let g_all: f64 = g.iter().sum();
    let score = |gs: f64, hs: f64| gs * gs / hs;
    let mut best: Option<(f64, Stump)> = None;
    for (j, col) in inst.columns.iter().enumerate() {
        let mut distinct = col.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        for cut in distinct.windows(2) {
            let goes_left: Vec<bool> = col.iter().map(|&v| v <= cut[0]).collect();
            let (mut gl, mut hl, mut gr, mut hr) = (0.0, 0.0, 0.0, 0.0);
            for i in 0..n {
                if goes_left[i] {
                    gl += g[i];
                    hl += 1.0;
                } else {
                    gr += g[i];
                    hr += 1.0;
                }
            }
            let gain = 0.5 * (score(gl, hl) + score(gr, hr) - score(g_all, n as f64));
            if gain > 0.0 && best.as_ref().is_none_or(|(b, _)| gain > *b) {
                best = Some((
                    gain,
                    Stump {
                        feature: j,
                        goes_left,
                        left_weight: -gl / hl,
                        right_weight: -gr / hr,
                    },
                ));
            }
        }
    }
    best.map(|(_, s)| s)
}

/// Independent statement of the expanding-window plan contract.
pub fn check_plan_shape(
    n: usize,
    k: usize,
    delta: usize,
    folds: &[(std::ops::Range<usize>, std::ops::Range<usize>)],
) -> Result<(), String> {
    if folds.len() != k {
        return Err(format!("expected {k} folds, got {}", folds.len()));
    }
    let mut prev_train_end = 0;
    let mut prev_val_end = 0;
    for (i, (train, val)) in folds.iter().enumerate() {
        if train.start != 0 {
            return Err(format!("fold {i}: training does not start at 0"));
        }
        if train.end < delta {
            return Err(format!("fold {i}: {} training rows, fewer than delta", train.end));
        }
        if val.start != train.end || val.end - val.start != delta {
            return Err(format!("fold {i}: validation {val:?} after training {train:?}"));
        }
        if val.end > n {
            return Err(format!("fold {i}: validation runs past row {n}"));
        }
        if i > 0 && (train.end <= prev_train_end || val.start < prev_val_end) {
            return Err(format!("fold {i}: not expanding"));
        }
        prev_train_end = train.end;
        prev_val_end = val.end;
    }
    if folds.last().map(|f| f.1.end) != Some(n) {
        return Err("last validation block does not end at n".into());
    }
    Ok(())
}

pub fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Deterministic part of the synthetic generator for a row at `hour` of the
/// day and `hour_of_week` (Monday 00:00 = 0), without trend.
pub fn synthetic_signal(base: f64, daily: f64, weekly: f64, hour: u32, hour_of_week: u32) -> f64 {
    use std::f64::consts::PI;
    base + daily * (2.0 * PI * hour as f64 / 24.0).sin() + weekly * (2.0 * PI * hour_of_week as f64 / 168.0).sin()
}
