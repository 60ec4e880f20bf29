//! Experiment reports and their text rendering.
//!
//! Every table printed by the command-line tool is rendered from one of these
//! structs alone, so a saved JSON report reproduces the console output.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::evaluation::{Metrics, PeriodBlock, ResidualStats};
use crate::gbtree::HyperParams;
use crate::tuner::Reversion;

pub const DELTA_CONVENTION: &str =
    "delta_performance_pct = 100 * (rmse_ablated - rmse_full) / rmse_full; positive values mean the ablated model is worse";
pub const IMPROVEMENT_CONVENTION: &str =
    "relative_improvement_pct = 100 * (rmse_baseline - rmse_candidate) / rmse_baseline; positive values favour the candidate";
pub const STABILITY_DEFINITION: &str = "stability = sample std of fold RMSE / mean fold RMSE";
pub const ATTRIBUTION_PROTOCOL: &str =
    "one-at-a-time reversion: each tuned parameter is reset to its default while the others keep their tuned values";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub data: String,
    pub rows: usize,
}

impl Environment {
    pub fn new(seed: u64, data: impl Into<String>, rows: usize) -> Self {
        Self {
            tool: "cyclecast".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            data: data.into(),
            rows,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitInfo {
    pub test_fraction: f64,
    pub train_rows: usize,
    pub test_rows: usize,
    pub warmup_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchCell {
    pub learner: String,
    pub encoding: String,
    pub metrics: Metrics,
    pub trees: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub train_time_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub learner: String,
    pub baseline: String,
    pub candidate: String,
    pub relative_improvement_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Importance {
    pub learner: String,
    pub encoding: String,
    pub no_splits: bool,
    pub shares: IndexMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub learner: String,
    pub encoding: String,
    pub periods: Vec<PeriodBlock>,
    pub residuals: ResidualStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub feature_set: String,
    pub rmse: f64,
    pub r2: Option<f64>,
    /// Zero for the full-feature row.
    pub delta_performance_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub report: String,
    pub environment: Environment,
    pub convention: String,
    pub learner: String,
    pub encoding: String,
    pub split: SplitInfo,
    pub rows: Vec<AblationRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub report: String,
    pub environment: Environment,
    pub convention: String,
    pub split: SplitInfo,
    pub cells: Vec<BenchCell>,
    pub improvements: Vec<Improvement>,
    pub feature_importance: Vec<Importance>,
    pub diagnostics: Option<Diagnostics>,
    pub ablation: Option<AblationReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub report: String,
    pub environment: Environment,
    pub folds: usize,
    pub fold_width: usize,
    pub budget: usize,
    pub init: usize,
    pub default_cv_score: Option<f64>,
    pub best_cv_score: f64,
    pub best_dispersion: f64,
    pub best_stability: f64,
    pub stability_definition: String,
    /// Relative to the default parameters; positive favours the tuned point.
    pub relative_improvement_pct: Option<f64>,
    pub best_params: HyperParams,
    pub attribution_protocol: String,
    pub attribution: Vec<Reversion>,
    pub incumbent_trace: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictReport {
    pub report: String,
    pub rows: usize,
    pub predictions_path: String,
    pub metrics: Option<Metrics>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_latency_us: Option<f64>,
}

/// Left-aligned first column, right-aligned others.
pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: Vec<&str>| -> String {
        let parts: Vec<String> = cells
            .iter()
            .zip(&width)
            .enumerate()
            .map(|(i, (c, &w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        parts.join("  ").trim_end().to_string()
    };
    let mut out = vec![line(header.to_vec())];
    out.push(width.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().join("  "));
    for r in rows {
        out.push(line(r.iter().map(String::as_str).collect()));
    }
    out.join("\n") + "\n"
}

fn f4(v: f64) -> String {
    format!("{v:.4}")
}

fn opt4(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), f4)
}

fn pct(v: f64) -> String {
    format!("{v:+.2}%")
}

pub fn render_bench(r: &BenchReport) -> String {
    let mut out = format!(
        "Benchmark ({} rows, seed {}; train {}, test {})\n\n",
        r.environment.rows, r.environment.seed, r.split.train_rows, r.split.test_rows
    );
    let rows: Vec<Vec<String>> = r
        .cells
        .iter()
        .map(|c| {
            vec![
                c.learner.clone(),
                c.encoding.clone(),
                f4(c.metrics.rmse),
                f4(c.metrics.mae),
                opt4(c.metrics.r2),
                c.train_time_s.map_or_else(|| "-".into(), |t| format!("{t:.2}")),
            ]
        })
        .collect();
    out += &table(&["Model", "Encoding", "RMSE", "MAE", "R²", "Time (s)"], &rows);

    if !r.improvements.is_empty() {
        out += "\nRMSE improvement (";
        out += &r.convention;
        out += ")\n";
        let rows: Vec<Vec<String>> = r
            .improvements
            .iter()
            .map(|i| {
                vec![
                    i.learner.clone(),
                    format!("{} vs {}", i.candidate, i.baseline),
                    pct(i.relative_improvement_pct),
                ]
            })
            .collect();
        out += &table(&["Model", "Comparison", "Improvement"], &rows);
    }

    for imp in &r.feature_importance {
        out += &format!("\nFeature importance ({}, {})\n", imp.learner, imp.encoding);
        if imp.no_splits {
            out += "no splits were made\n";
            continue;
        }
        let mut ranked: Vec<(&String, &f64)> = imp.shares.iter().collect();
        ranked.sort_by(|a, b| b.1.total_cmp(a.1));
        let rows: Vec<Vec<String>> = ranked
            .iter()
            .take(10)
            .map(|(k, v)| vec![(*k).clone(), f4(**v)])
            .collect();
        out += &table(&["Feature", "Share"], &rows);
    }

    if let Some(d) = &r.diagnostics {
        out += &format!("\nPerformance by time period ({}, {})\n", d.learner, d.encoding);
        out += &render_periods(&d.periods);
        out += &format!("\nResiduals ({}, {})\n", d.learner, d.encoding);
        out += &render_residuals(&d.residuals);
    }
    if let Some(a) = &r.ablation {
        out += "\n";
        out += &render_ablation(a);
    }
    out
}

pub fn render_periods(blocks: &[PeriodBlock]) -> String {
    let rows: Vec<Vec<String>> = blocks
        .iter()
        .map(|b| match &b.metrics {
            Some(m) => vec![
                b.period.label().into(),
                b.n.to_string(),
                f4(m.rmse),
                f4(m.mae),
                format!("{:.2}", m.mape_pct),
            ],
            None => vec![
                b.period.label().into(),
                "0".into(),
                "empty".into(),
                "-".into(),
                "-".into(),
            ],
        })
        .collect();
    table(&["Period", "Rows", "RMSE", "MAE", "MAPE(%)"], &rows)
}

pub fn render_residuals(s: &ResidualStats) -> String {
    let rows = vec![
        vec!["mean".into(), f4(s.mean)],
        vec!["std".into(), f4(s.std)],
        vec!["skewness".into(), opt4(s.skewness)],
        vec!["kurtosis (raw)".into(), opt4(s.kurtosis)],
    ];
    table(&["Statistic", "Value"], &rows)
}

pub fn render_ablation(r: &AblationReport) -> String {
    let mut out = format!("Feature ablation ({}, {})\n{}\n", r.learner, r.encoding, r.convention);
    let rows: Vec<Vec<String>> = r
        .rows
        .iter()
        .map(|a| {
            vec![
                a.feature_set.clone(),
                f4(a.rmse),
                opt4(a.r2),
                pct(a.delta_performance_pct),
            ]
        })
        .collect();
    out += &table(&["Feature Set", "RMSE", "R²", "ΔPerformance"], &rows);
    out
}

pub fn render_tune(r: &TuneReport) -> String {
    let mut out = format!(
        "Tuning ({} trials, {} initial, {} folds of {} rows)\n\n",
        r.budget, r.init, r.folds, r.fold_width
    );
    let mut rows = vec![vec!["tuned".into(), f4(r.best_cv_score)]];
    if let Some(d) = r.default_cv_score {
        rows.insert(0, vec!["default".into(), f4(d)]);
    }
    out += &table(&["Parameters", "CV RMSE"], &rows);
    if let Some(p) = r.relative_improvement_pct {
        out += &format!("improvement over default: {}\n", pct(p));
    }
    out += &format!("stability: {} ({})\n", f4(r.best_stability), r.stability_definition);
    let p = &r.best_params;
    let rows = vec![
        vec!["learning_rate".into(), format!("{:.6}", p.learning_rate)],
        vec!["max_depth".into(), p.max_depth.to_string()],
        vec!["n_estimators".into(), p.n_estimators.to_string()],
        vec!["min_child_weight".into(), f4(p.min_child_weight)],
        vec!["subsample".into(), f4(p.subsample)],
        vec!["colsample_bytree".into(), f4(p.colsample_bytree)],
        vec!["gamma".into(), f4(p.gamma)],
    ];
    out += "\nBest parameters\n";
    out += &table(&["Parameter", "Value"], &rows);
    if !r.attribution.is_empty() {
        out += &format!("\nAttribution ({})\n", r.attribution_protocol);
        let rows: Vec<Vec<String>> = r
            .attribution
            .iter()
            .map(|a| {
                vec![
                    a.parameter.clone(),
                    format!("{} -> {}", fmt_num(a.tuned), fmt_num(a.reverted_to)),
                    opt4(a.objective),
                    a.relative_change.map_or_else(|| "failed".into(), |v| pct(100.0 * v)),
                ]
            })
            .collect();
        out += &table(&["Parameter", "Reverted", "CV RMSE", "Change"], &rows);
    }
    out
}

fn fmt_num(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e9 {
        format!("{v:.0}")
    } else {
        format!("{v:.4}")
    }
}

pub fn render_predict(r: &PredictReport) -> String {
    let mut out = format!("{} predictions written to {}\n", r.rows, r.predictions_path);
    if let Some(us) = r.mean_latency_us {
        out += &format!("mean latency: {us:.2} µs/row\n");
    }
    if let Some(m) = &r.metrics {
        out += &table(
            &["RMSE", "MAE", "R²", "MAPE(%)"],
            &[vec![f4(m.rmse), f4(m.mae), opt4(m.r2), format!("{:.2}", m.mape_pct)]],
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_alignment() {
        let t = table(
            &["A", "Num"],
            &[vec!["long name".into(), "1.5".into()], vec!["x".into(), "10.25".into()]],
        );
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "A            Num");
        assert_eq!(lines[2], "long name    1.5");
        assert_eq!(lines[3], "x          10.25");
    }
}
