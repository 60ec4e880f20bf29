//! Metrics, expanding-window cross-validation, time-of-day breakdowns and
//! residual moments.

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::TimeSeriesFrame;
use crate::features::{build_matrix, FeatureSpec};
use crate::gbtree::{self, HyperParams};

/// Denominator floor for MAPE.
pub const MAPE_EPSILON: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("length mismatch: {left} targets vs {right} predictions")]
    LengthMismatch { left: usize, right: usize },
    #[error("metrics need at least one row")]
    Empty,
    #[error("{what} is undefined: {reason}")]
    Undefined { what: &'static str, reason: String },
    #[error("{n} rows cannot hold {k} folds of width {delta} after {min_train} training rows")]
    InsufficientRows {
        n: usize,
        k: usize,
        delta: usize,
        min_train: usize,
    },
    #[error("invalid cross-validation plan: {0}")]
    InvalidPlan(String),
    #[error("fold {fold} has {rows} training rows after warm-up (need at least 2)")]
    FoldTooSmall { fold: usize, rows: usize },
    #[error("hour {0} outside [0, 24)")]
    InvalidHour(u32),
    #[error("residual moments need at least 4 values, got {0}")]
    TooFewResiduals(usize),
}

fn check(y: &[f64], y_hat: &[f64]) -> Result<(), EvalError> {
    if y.len() != y_hat.len() {
        return Err(EvalError::LengthMismatch {
            left: y.len(),
            right: y_hat.len(),
        });
    }
    if y.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(())
}

pub fn rmse(y: &[f64], y_hat: &[f64]) -> Result<f64, EvalError> {
    check(y, y_hat)?;
    let sse: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sse / y.len() as f64).sqrt())
}

pub fn mae(y: &[f64], y_hat: &[f64]) -> Result<f64, EvalError> {
    check(y, y_hat)?;
    let sae: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b).abs()).sum();
    Ok(sae / y.len() as f64)
}

/// Coefficient of determination; undefined for a constant target.
pub fn r2(y: &[f64], y_hat: &[f64]) -> Result<f64, EvalError> {
    check(y, y_hat)?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let sst: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    if sst == 0.0 {
        return Err(EvalError::Undefined {
            what: "r2",
            reason: "target has zero variance".into(),
        });
    }
    let sse: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(1.0 - sse / sst)
}

/// Mean absolute percentage error with the denominator floored at
/// [`MAPE_EPSILON`]; the flag reports whether the floor was used.
pub fn mape_pct(y: &[f64], y_hat: &[f64]) -> Result<(f64, bool), EvalError> {
    check(y, y_hat)?;
    let mut floored = false;
    let mut total = 0.0;
    for (a, b) in y.iter().zip(y_hat) {
        let denom = if a.abs() < MAPE_EPSILON {
            floored = true;
            MAPE_EPSILON
        } else {
            a.abs()
        };
        total += (a - b).abs() / denom;
    }
    Ok((100.0 * total / y.len() as f64, floored))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rmse: f64,
    pub mae: f64,
    /// `None` when the target is constant; see `r2_note`.
    pub r2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub r2_note: Option<String>,
    pub mape_pct: f64,
    pub mape_floored: bool,
    pub n: usize,
}

impl Metrics {
    pub fn compute(y: &[f64], y_hat: &[f64]) -> Result<Self, EvalError> {
        let (r2, r2_note) = match r2(y, y_hat) {
            Ok(v) => (Some(v), None),
            Err(EvalError::Undefined { reason, .. }) => (None, Some(reason)),
            Err(e) => return Err(e),
        };
        let (mape_pct, mape_floored) = mape_pct(y, y_hat)?;
        Ok(Self {
            rmse: rmse(y, y_hat)?,
            mae: mae(y, y_hat)?,
            r2,
            r2_note,
            mape_pct,
            mape_floored,
            n: y.len(),
        })
    }
}

/// `(candidate - baseline) / baseline`; positive means the candidate is worse
/// for error metrics.
pub fn relative_change(candidate: f64, baseline: f64) -> f64 {
    (candidate - baseline) / baseline
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    /// Always starts at row 0.
    pub train: Range<usize>,
    pub val: Range<usize>,
}

/// Expanding-window plan over row indices `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvPlan {
    pub k: usize,
    pub delta: usize,
    pub folds: Vec<Fold>,
}

impl CvPlan {
    /// Checks ordering, nesting and disjointness of the folds.
    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: String| Err(EvalError::InvalidPlan(m));
        if self.folds.len() != self.k {
            return bad(format!("{} folds for k = {}", self.folds.len(), self.k));
        }
        for (i, f) in self.folds.iter().enumerate() {
            if f.train.start != 0 || f.train.is_empty() {
                return bad(format!("fold {i} training range {:?}", f.train));
            }
            if f.val.len() != self.delta || f.val.start != f.train.end {
                return bad(format!("fold {i} validation range {:?}", f.val));
            }
            if i > 0 {
                let prev = &self.folds[i - 1];
                if f.train.end <= prev.train.end || f.val.start < prev.val.end {
                    return bad(format!("fold {i} does not expand past fold {}", i - 1));
                }
            }
        }
        Ok(())
    }
}

/// `k` trailing validation blocks of width `delta` ending at row `n`, with at
/// least `delta` training rows before the first.
pub fn expanding_splits(n: usize, k: usize, delta: usize) -> Result<CvPlan, EvalError> {
    expanding_splits_with_min_train(n, k, delta, delta)
}

pub fn expanding_splits_with_min_train(
    n: usize,
    k: usize,
    delta: usize,
    min_train: usize,
) -> Result<CvPlan, EvalError> {
    if k == 0 || delta == 0 {
        return Err(EvalError::InvalidPlan("k and delta must be at least 1".into()));
    }
    let needed = k
        .checked_mul(delta)
        .and_then(|v| v.checked_add(min_train.max(1)))
        .unwrap_or(usize::MAX);
    if n < needed {
        return Err(EvalError::InsufficientRows { n, k, delta, min_train });
    }
    let first = n - k * delta;
    let folds = (0..k)
        .map(|i| {
            let start = first + i * delta;
            Fold {
                train: 0..start,
                val: start..start + delta,
            }
        })
        .collect();
    Ok(CvPlan { k, delta, folds })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    /// Mean of the fold RMSEs.
    pub cv_score: f64,
    pub fold_metrics: Vec<Metrics>,
    /// Sample standard deviation of the fold RMSEs (0 for a single fold).
    pub dispersion: f64,
    /// `dispersion / cv_score`.
    pub stability: f64,
}

/// Fits one model per fold of [`expanding_splits`] over the frame rows and
/// scores it on the fold's validation block. Features for a fold are built
/// from the rows up to the end of its validation block only.
pub fn cross_validate(
    frame: &TimeSeriesFrame,
    spec: &FeatureSpec,
    params: &HyperParams,
    k: usize,
    delta: usize,
) -> crate::Result<CvResult> {
    let plan = expanding_splits(frame.len(), k, delta)?;
    let fold_metrics = plan
        .folds
        .par_iter()
        .enumerate()
        .map(|(i, fold)| run_fold(frame, spec, params, i, fold))
        .collect::<crate::Result<Vec<_>>>()?;
    let rmses: Vec<f64> = fold_metrics.iter().map(|m| m.rmse).collect();
    let cv_score = rmses.iter().sum::<f64>() / rmses.len() as f64;
    let dispersion = sample_std(&rmses);
    Ok(CvResult {
        cv_score,
        dispersion,
        stability: if cv_score > 0.0 { dispersion / cv_score } else { 0.0 },
        fold_metrics,
    })
}

fn run_fold(
    frame: &TimeSeriesFrame,
    spec: &FeatureSpec,
    params: &HyperParams,
    i: usize,
    fold: &Fold,
) -> crate::Result<Metrics> {
    let prefix = frame.slice(0..fold.val.end);
    let m = build_matrix(&prefix, spec)?;
    // matrix row r corresponds to frame row r + dropped_warmup
    let split = fold.val.start.saturating_sub(m.dropped_warmup);
    if split < 2 {
        return Err(EvalError::FoldTooSmall { fold: i, rows: split }.into());
    }
    let train = m.select_rows(0..split);
    let val = m.select_rows(split..m.n_rows());
    let (model, _) = gbtree::fit(&train, params, None)?;
    let pred = model.predict(&val)?;
    Ok(Metrics::compute(&val.target, &pred)?)
}

fn sample_std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let ss: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
    (ss / (v.len() - 1) as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Period {
    Morning,
    Afternoon,
    Evening,
    Night,
}

impl Period {
    /// Report order.
    pub const ALL: [Period; 4] = [Period::Morning, Period::Afternoon, Period::Evening, Period::Night];

    pub fn of_hour(hour: u32) -> Result<Period, EvalError> {
        Ok(match hour {
            0..6 => Period::Night,
            6..12 => Period::Morning,
            12..18 => Period::Afternoon,
            18..24 => Period::Evening,
            h => return Err(EvalError::InvalidHour(h)),
        })
    }

    pub fn label(self) -> &'static str {
        match self {
            Period::Morning => "Morning (6-12)",
            Period::Afternoon => "Afternoon (12-18)",
            Period::Evening => "Evening (18-24)",
            Period::Night => "Night (0-6)",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodBlock {
    pub period: Period,
    pub n: usize,
    /// `None` when no rows fall in the block.
    pub metrics: Option<Metrics>,
}

pub fn period_breakdown(y: &[f64], y_hat: &[f64], hours: &[u32]) -> Result<Vec<PeriodBlock>, EvalError> {
    check(y, y_hat)?;
    if hours.len() != y.len() {
        return Err(EvalError::LengthMismatch {
            left: y.len(),
            right: hours.len(),
        });
    }
    let mut buckets: [(Vec<f64>, Vec<f64>); 4] = Default::default();
    for ((&a, &b), &h) in y.iter().zip(y_hat).zip(hours) {
        let p = Period::of_hour(h)?;
        let slot = Period::ALL.iter().position(|&q| q == p).expect("period listed");
        buckets[slot].0.push(a);
        buckets[slot].1.push(b);
    }
    Period::ALL
        .iter()
        .zip(buckets)
        .map(|(&period, (ys, ps))| {
            let metrics = if ys.is_empty() {
                None
            } else {
                Some(Metrics::compute(&ys, &ps)?)
            };
            Ok(PeriodBlock {
                period,
                n: ys.len(),
                metrics,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualStats {
    pub mean: f64,
    /// Sample standard deviation (n - 1).
    pub std: f64,
    /// `m3 / m2^1.5`; `None` for zero variance.
    pub skewness: Option<f64>,
    /// Raw (non-excess) kurtosis `m4 / m2^2`; `None` for zero variance.
    pub kurtosis: Option<f64>,
    pub n: usize,
}

pub fn residual_stats(residuals: &[f64]) -> Result<ResidualStats, EvalError> {
    let n = residuals.len();
    if n < 4 {
        return Err(EvalError::TooFewResiduals(n));
    }
    let nf = n as f64;
    let mean = residuals.iter().sum::<f64>() / nf;
    let (mut s2, mut s3, mut s4) = (0.0, 0.0, 0.0);
    for r in residuals {
        let d = r - mean;
        let d2 = d * d;
        s2 += d2;
        s3 += d2 * d;
        s4 += d2 * d2;
    }
    let (m2, m3, m4) = (s2 / nf, s3 / nf, s4 / nf);
    let (skewness, kurtosis) = if m2 > 0.0 {
        (Some(m3 / m2.powf(1.5)), Some(m4 / (m2 * m2)))
    } else {
        (None, None)
    };
    Ok(ResidualStats {
        mean,
        std: (s2 / (nf - 1.0)).sqrt(),
        skewness,
        kurtosis,
        n,
    })
}
