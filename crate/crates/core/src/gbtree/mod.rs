//! Gradient-boosted regression trees under squared loss.
//!
//! Trees are grown by exact greedy search over presorted feature columns
//! with the second-order gain `½[G_L²/(H_L+λ) + G_R²/(H_R+λ) − G²/(H+λ)] − γ`.
//! Rows can be subsampled uniformly or by GOSS, columns are sampled per tree,
//! and training stops once the validation loss has not reached a new minimum
//! for `patience` rounds.

mod goss;
mod params;
mod tree;

use std::path::Path;

use indexmap::IndexMap;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureMatrix;

pub use goss::{goss_sample, goss_sample_with, GossSample};
pub use params::{GossAmplification, GossParams, GrowthPolicy, HyperParams};
pub use tree::{leaf_weight, split_gain, Node, RegressionTree};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum GbtError {
    #[error("training needs at least 2 rows and 1 feature")]
    Empty,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("hessian sum plus lambda is zero")]
    ZeroHessian,
    #[error("matrix has no target values")]
    Unlabeled,
    #[error("invalid hyper-parameters: {0}")]
    InvalidParams(String),
    #[error("non-finite value in {what} at row {row}")]
    NonFinite { what: String, row: usize },
    #[error("feature columns do not match the model (missing {missing:?}, unexpected {unexpected:?}{})", if *.reordered { ", order differs" } else { "" })]
    ColumnMismatch {
        missing: Vec<String>,
        unexpected: Vec<String>,
        reordered: bool,
    },
    #[error("unsupported model format version {found} (expected {MODEL_FORMAT_VERSION})")]
    FormatVersion { found: u32 },
}

/// Gradients and hessians of `½(ŷ − y)²` with respect to `ŷ`.
pub fn squared_loss_grad_hess(y: &[f64], pred: &[f64]) -> Result<(Vec<f64>, Vec<f64>), GbtError> {
    if y.len() != pred.len() {
        return Err(GbtError::LengthMismatch {
            left: y.len(),
            right: pred.len(),
        });
    }
    Ok((pred.iter().zip(y).map(|(p, t)| p - t).collect(), vec![1.0; y.len()]))
}

/// True once the best of the last `patience` losses is worse than the best
/// loss seen before them.
pub fn should_stop(val_losses: &[f64], patience: usize) -> bool {
    let t = val_losses.len();
    if patience == 0 || t <= patience {
        return false;
    }
    let (earlier, recent) = val_losses.split_at(t - patience);
    let min = |s: &[f64]| s.iter().copied().fold(f64::INFINITY, f64::min);
    min(recent) > min(earlier)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// All `n_estimators` rounds ran.
    Budget,
    EarlyStopping,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainLog {
    pub train_rmse: Vec<f64>,
    /// Empty when no validation set was given.
    pub val_rmse: Vec<f64>,
    pub stop_reason: StopReason,
    pub best_iteration: usize,
    /// Training-set predictions of the returned model.
    #[serde(skip)]
    pub train_predictions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub format_version: u32,
    pub column_names: Vec<String>,
    pub base_score: f64,
    pub learning_rate: f64,
    /// Number of trees kept (the validation optimum when early stopping ran).
    pub best_iteration: usize,
    pub params: HyperParams,
    pub trees: Vec<RegressionTree>,
    /// Total split gain per column over the kept trees.
    pub gain_by_feature: Vec<f64>,
}

fn rmse(pred: &[f64], y: &[f64]) -> f64 {
    let ss: f64 = pred.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum();
    (ss / y.len() as f64).sqrt()
}

fn check_finite(m: &FeatureMatrix, what: &str) -> Result<(), GbtError> {
    for (name, col) in m.column_names.iter().zip(&m.columns) {
        if let Some(row) = col.iter().position(|v| !v.is_finite()) {
            return Err(GbtError::NonFinite {
                what: format!("{what} column {name}"),
                row,
            });
        }
    }
    if let Some(row) = m.target.iter().position(|v| !v.is_finite()) {
        return Err(GbtError::NonFinite {
            what: format!("{what} target"),
            row,
        });
    }
    Ok(())
}

fn check_columns(expected: &[String], got: &[String]) -> Result<(), GbtError> {
    if expected == got {
        return Ok(());
    }
    let missing: Vec<String> = expected.iter().filter(|c| !got.contains(c)).cloned().collect();
    let unexpected: Vec<String> = got.iter().filter(|c| !expected.contains(c)).cloned().collect();
    let reordered = missing.is_empty() && unexpected.is_empty();
    Err(GbtError::ColumnMismatch {
        missing,
        unexpected,
        reordered,
    })
}

fn sample_sorted(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut v = rand::seq::index::sample(rng, n, k).into_vec();
    v.sort_unstable();
    v
}

/// Trains a booster on `train`, early-stopping on `valid` when given.
pub fn fit(
    train: &FeatureMatrix,
    params: &HyperParams,
    valid: Option<&FeatureMatrix>,
) -> Result<(GbtModel, TrainLog), GbtError> {
    params.validate()?;
    let n = train.n_rows();
    if n < 2 || train.n_cols() == 0 {
        return Err(GbtError::Empty);
    }
    if train.target.len() != n {
        return Err(GbtError::Unlabeled);
    }
    check_finite(train, "training")?;
    if let Some(v) = valid {
        check_columns(&train.column_names, &v.column_names)?;
        if v.n_rows() == 0 {
            return Err(GbtError::InvalidParams("validation set is empty".into()));
        }
        if v.target.len() != v.n_rows() {
            return Err(GbtError::Unlabeled);
        }
        check_finite(v, "validation")?;
    }

    let y = &train.target;
    let n_cols = train.n_cols();
    let presorted: Vec<Vec<u32>> = train
        .columns
        .iter()
        .map(|col| {
            let mut order: Vec<u32> = (0..n as u32).collect();
            order.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]));
            order
        })
        .collect();

    let base_score = y.iter().sum::<f64>() / n as f64;
    let eta = params.learning_rate;
    let mut pred = vec![base_score; n];
    let mut val_pred = valid.map(|v| vec![base_score; v.n_rows()]);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut trees = Vec::with_capacity(params.n_estimators);
    let mut log = TrainLog {
        train_rmse: Vec::new(),
        val_rmse: Vec::new(),
        stop_reason: StopReason::Budget,
        best_iteration: 0,
        train_predictions: Vec::new(),
    };
    let mut best_val = f64::INFINITY;
    let mut best_pred = pred.clone();
    for _ in 0..params.n_estimators {
        let (grad, hess) = squared_loss_grad_hess(y, &pred)?;

        let n_feat = ((params.colsample_bytree * n_cols as f64 + 1e-9).floor() as usize).clamp(1, n_cols.max(1));
        let features: Vec<usize> = if n_feat < n_cols {
            sample_sorted(&mut rng, n_cols, n_feat)
        } else {
            (0..n_cols).collect()
        };

        // rows in the sample, ascending, with their gradient weights
        let mut weight = vec![0.0; n];
        let rows: Vec<u32> = if let Some(g) = params.goss {
            let s = goss_sample_with(
                &grad,
                g.top_rate,
                g.other_rate,
                params.goss_amplification,
                rng.next_u64(),
            )?;
            for (&i, &w) in s.indices.iter().zip(&s.weights) {
                weight[i] = w;
            }
            s.indices.iter().map(|&i| i as u32).collect()
        } else if params.subsample < 1.0 {
            let m = ((params.subsample * n as f64).round() as usize).clamp(1, n);
            let idx = sample_sorted(&mut rng, n, m);
            for &i in &idx {
                weight[i] = 1.0;
            }
            idx.into_iter().map(|i| i as u32).collect()
        } else {
            weight.fill(1.0);
            (0..n as u32).collect()
        };
        let wg: Vec<f64> = grad.iter().zip(&weight).map(|(g, w)| g * w).collect();
        let wh: Vec<f64> = hess.iter().zip(&weight).map(|(h, w)| h * w).collect();
        let sorted: Vec<Vec<u32>> = features
            .iter()
            .map(|&j| {
                presorted[j]
                    .iter()
                    .copied()
                    .filter(|&r| weight[r as usize] > 0.0)
                    .collect()
            })
            .collect();

        let builder = tree::TreeBuilder {
            columns: &train.columns,
            grad: &wg,
            hess: &wh,
            features: &features,
            params,
        };
        let tree = builder.build(rows, sorted);

        for (i, p) in pred.iter_mut().enumerate() {
            *p += eta * tree.leaf_for_row(&train.columns, i);
        }
        log.train_rmse.push(rmse(&pred, y));

        if let (Some(v), Some(vp)) = (valid, val_pred.as_mut()) {
            for (i, p) in vp.iter_mut().enumerate() {
                *p += eta * tree.leaf_for_row(&v.columns, i);
            }
            let loss = rmse(vp, &v.target);
            log.val_rmse.push(loss);
            trees.push(tree);
            if loss < best_val {
                best_val = loss;
                best_pred.copy_from_slice(&pred);
            }
            if should_stop(&log.val_rmse, params.patience) {
                log.stop_reason = StopReason::EarlyStopping;
                break;
            }
        } else {
            trees.push(tree);
        }
    }

    let best_iteration = if valid.is_some() {
        // first index of the minimum, as a tree count
        let mut arg = 0;
        for (k, &l) in log.val_rmse.iter().enumerate() {
            if l < log.val_rmse[arg] {
                arg = k;
            }
        }
        arg + 1
    } else {
        trees.len()
    };
    trees.truncate(best_iteration);
    log.best_iteration = best_iteration;
    log.train_predictions = if valid.is_some() { best_pred } else { pred };

    let mut gain_by_feature = vec![0.0; n_cols];
    for t in &trees {
        for (j, g) in t.splits() {
            gain_by_feature[j] += g;
        }
    }

    let model = GbtModel {
        format_version: MODEL_FORMAT_VERSION,
        column_names: train.column_names.clone(),
        base_score,
        learning_rate: eta,
        best_iteration,
        params: params.clone(),
        trees,
        gain_by_feature,
    };
    Ok((model, log))
}

/// Normalised gain shares in column order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureImportance {
    pub shares: IndexMap<String, f64>,
    /// Set when the model made no splits; all shares are then zero.
    pub no_splits: bool,
}

impl FeatureImportance {
    /// Columns by descending share, ties in column order.
    pub fn ranked(&self) -> Vec<(&str, f64)> {
        let mut v: Vec<(&str, f64)> = self.shares.iter().map(|(k, &s)| (k.as_str(), s)).collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1));
        v
    }
}

pub fn feature_importance(model: &GbtModel) -> FeatureImportance {
    let total: f64 = model.gain_by_feature.iter().sum();
    let no_splits = !(total > 0.0);
    let shares = model
        .column_names
        .iter()
        .zip(&model.gain_by_feature)
        .map(|(name, &g)| (name.clone(), if no_splits { 0.0 } else { g / total }))
        .collect();
    FeatureImportance { shares, no_splits }
}

pub fn predict(model: &GbtModel, x: &FeatureMatrix) -> Result<Vec<f64>, GbtError> {
    model.predict(x)
}

impl GbtModel {
    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<f64>, GbtError> {
        check_columns(&self.column_names, &x.column_names)?;
        for (name, col) in x.column_names.iter().zip(&x.columns) {
            if let Some(row) = col.iter().position(|v| !v.is_finite()) {
                return Err(GbtError::NonFinite {
                    what: format!("column {name}"),
                    row,
                });
            }
        }
        Ok(self.predict_columns(&x.columns, x.n_rows()))
    }

    /// Prediction without column checks; `columns` must follow
    /// `column_names`.
    pub fn predict_columns(&self, columns: &[Vec<f64>], n_rows: usize) -> Vec<f64> {
        let mut out = vec![self.base_score; n_rows];
        for t in &self.trees {
            for (i, p) in out.iter_mut().enumerate() {
                *p += self.learning_rate * t.leaf_for_row(columns, i);
            }
        }
        out
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut p = self.base_score;
        for t in &self.trees {
            p += self.learning_rate * t.leaf_value(|j| row[j]);
        }
        p
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serialises")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn save(&self, path: &Path) -> crate::Result<()> {
        std::fs::write(path, self.to_json()).map_err(|source| crate::Error::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> crate::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| crate::Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let model = Self::from_json(&text).map_err(|source| crate::Error::Json {
            path: path.display().to_string(),
            source,
        })?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(GbtError::FormatVersion {
                found: model.format_version,
            }
            .into());
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(x: Vec<Vec<f64>>, y: Vec<f64>) -> FeatureMatrix {
        let names = (0..x.len()).map(|j| format!("f{j}")).collect();
        FeatureMatrix::from_columns(names, x, y).unwrap()
    }

    #[test]
    fn stop_predicate() {
        assert!(!should_stop(&[3.0, 2.0, 1.0], 2));
        assert!(should_stop(&[1.0, 2.0, 3.0], 2));
        // a tie with the earlier minimum is not an improvement, but not worse
        assert!(!should_stop(&[1.0, 1.0, 1.0], 2));
        assert!(!should_stop(&[1.0, 2.0], 2));
    }

    #[test]
    fn constant_target_is_reproduced() {
        let x = vec![(0..50).map(f64::from).collect()];
        let m = matrix(x, vec![3.25; 50]);
        let (model, log) = fit(&m, &HyperParams::default(), None).unwrap();
        assert!(model.trees.iter().all(|t| t.n_leaves() == 1));
        assert!(model.predict(&m).unwrap().iter().all(|&p| p == 3.25));
        assert!(feature_importance(&model).no_splits);
        assert_eq!(log.stop_reason, StopReason::Budget);
    }

    #[test]
    fn training_predictions_match_predict_bitwise() {
        let x: Vec<f64> = (0..200).map(|i| (i as f64 * 0.13).sin()).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + v * v).collect();
        let m = matrix(vec![x], y);
        let p = HyperParams {
            subsample: 0.7,
            n_estimators: 30,
            ..Default::default()
        };
        let (model, log) = fit(&m, &p, None).unwrap();
        assert_eq!(model.predict(&m).unwrap(), log.train_predictions);
    }

    #[test]
    fn column_mismatch_is_reported() {
        let m = matrix(vec![vec![1.0, 2.0, 3.0], vec![0.0, 1.0, 0.0]], vec![1.0, 2.0, 3.0]);
        let (model, _) = fit(&m, &HyperParams::default(), None).unwrap();
        let mut other = m.clone();
        other.column_names.swap(0, 1);
        match model.predict(&other) {
            Err(GbtError::ColumnMismatch { reordered, .. }) => assert!(reordered),
            r => panic!("{r:?}"),
        }
        other.column_names[0] = "zzz".into();
        assert!(matches!(model.predict(&other), Err(GbtError::ColumnMismatch { .. })));
    }

    #[test]
    fn rejects_non_finite() {
        let m = matrix(vec![vec![1.0, f64::NAN]], vec![1.0, 2.0]);
        assert!(matches!(
            fit(&m, &HyperParams::default(), None),
            Err(GbtError::NonFinite { .. })
        ));
    }
}
