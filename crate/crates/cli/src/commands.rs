use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use cyclecast::dataset::{
    generate_synthetic, load_csv, read_csv_headers, split_point, write_csv, CsvSchema, SyntheticConfig, TimeSeriesFrame,
};
use cyclecast::evaluation::{cross_validate, period_breakdown, residual_stats, CvResult, Metrics};
use cyclecast::features::{build_matrix, FeatureGroup, FeatureMatrix, FeatureSpec};
use cyclecast::gbtree::{self, feature_importance, GbtModel, HyperParams};
use cyclecast::report::{
    AblationReport, AblationRow, BenchCell, BenchReport, Diagnostics, Environment, Importance, Improvement,
    PredictReport, SplitInfo, TuneReport, ATTRIBUTION_PROTOCOL, DELTA_CONVENTION, IMPROVEMENT_CONVENTION,
    STABILITY_DEFINITION,
};
use cyclecast::tuner::{optimize, reversion_attribution, OptimizerConfig, ParamSpace, Trial};
use cyclecast::EncodingStrategy;
use serde::{Deserialize, Serialize};

use crate::args::{AblationArgs, BenchArgs, DataArgs, Global, PredictArgs, SynthArgs, SyntheticArgs, TuneArgs};
use crate::CliError;

pub const BUNDLE_FORMAT_VERSION: u32 = 1;

/// Everything `predict` needs to rebuild features and score new rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format_version: u32,
    pub target: String,
    pub feature_spec: FeatureSpec,
    pub model: GbtModel,
}

impl ModelBundle {
    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        write_text(path, &(serde_json::to_string(self).expect("bundle serialises") + "\n"))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let b: ModelBundle = serde_json::from_str(&text).map_err(|source| CliError::Data {
            context: "reading model bundle".into(),
            source: cyclecast::Error::Json {
                path: path.display().to_string(),
                source,
            },
        })?;
        if b.format_version != BUNDLE_FORMAT_VERSION {
            return Err(CliError::Usage(format!(
                "{}: bundle format {} is not supported",
                path.display(),
                b.format_version
            )));
        }
        Ok(b)
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Data {
        context: "file access".into(),
        source: cyclecast::Error::Io {
            path: path.display().to_string(),
            source,
        },
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    fs::write(path, text).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    write_text(path, &(text + "\n"))
}

pub fn synthetic_config(a: &SyntheticArgs, seed: u64) -> SyntheticConfig {
    SyntheticConfig {
        n_hours: a.hours,
        base_level: a.base_level,
        daily_amplitude: a.daily,
        weekly_amplitude: a.weekly,
        trend_slope: a.trend,
        noise_std: a.noise,
        seed,
        ..SyntheticConfig::default()
    }
}

/// Loads `--data` or generates the synthetic series; returns the frame and a
/// label for the report.
pub fn load_frame(d: &DataArgs, seed: u64) -> Result<(TimeSeriesFrame, String), CliError> {
    match &d.data {
        Some(path) => {
            let headers = read_csv_headers(path).map_err(CliError::data("reading CSV header"))?;
            let schema = CsvSchema::from_headers(headers.iter().map(String::as_str), &d.time_col, &d.target);
            let frame = load_csv(path, &schema).map_err(CliError::data(format!("loading {}", path.display())))?;
            Ok((frame, path.display().to_string()))
        }
        None => {
            let cfg = synthetic_config(&d.synthetic, seed);
            let frame = generate_synthetic(&cfg).map_err(CliError::data("generating synthetic data"))?;
            let label = format!(
                "synthetic(hours={}, daily={}, weekly={}, trend={}, noise={}, seed={})",
                cfg.n_hours, cfg.daily_amplitude, cfg.weekly_amplitude, cfg.trend_slope, cfg.noise_std, cfg.seed
            );
            Ok((frame, label))
        }
    }
}

fn base_spec(g: &Global) -> Result<FeatureSpec, CliError> {
    match &g.features {
        Some(path) => FeatureSpec::from_json_file(path).map_err(CliError::usage("--features")),
        None => Ok(FeatureSpec::default()),
    }
}

fn read_overrides(path: Option<&PathBuf>) -> Result<Option<serde_json::Value>, CliError> {
    let Some(path) = path else { return Ok(None) };
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let v: serde_json::Value =
        serde_json::from_str(&text).map_err(CliError::usage(format!("--params {}", path.display())))?;
    if !v.is_object() {
        return Err(CliError::Usage(format!(
            "--params {}: expected a JSON object",
            path.display()
        )));
    }
    Ok(Some(v))
}

/// Named learner configuration with optional field overrides.
pub fn learner_params(name: &str, overrides: Option<&serde_json::Value>, seed: u64) -> Result<HyperParams, CliError> {
    let preset = match name {
        "xgb-style" => HyperParams::xgb_style(),
        "lgbm-style" => HyperParams::lgbm_style(),
        "default" => HyperParams::default(),
        other => {
            return Err(CliError::Usage(format!(
                "unknown learner `{other}` (expected xgb-style, lgbm-style or default)"
            )))
        }
    };
    let mut p = match overrides {
        Some(o) => {
            let mut v = serde_json::to_value(&preset).expect("params serialise");
            for (k, val) in o.as_object().expect("checked object") {
                if v.get(k).is_none() {
                    return Err(CliError::Usage(format!("--params: unknown field `{k}`")));
                }
                v[k] = val.clone();
            }
            serde_json::from_value(v).map_err(CliError::usage("--params"))?
        }
        None => preset,
    };
    p.seed = seed;
    p.validate().map_err(CliError::usage(format!("learner {name}")))?;
    Ok(p)
}

struct Holdout {
    train: FeatureMatrix,
    test: FeatureMatrix,
    model: GbtModel,
    test_pred: Vec<f64>,
    metrics: Metrics,
    secs: f64,
}

fn holdout(
    frame: &TimeSeriesFrame,
    spec: &FeatureSpec,
    params: &HyperParams,
    test_fraction: f64,
    cell: &str,
) -> Result<Holdout, CliError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(CliError::Usage(format!(
            "--test-fraction {test_fraction} must be in (0, 1)"
        )));
    }
    let m = build_matrix(frame, spec).map_err(CliError::data(format!("{cell}: building features")))?;
    let cut = split_point(frame.len(), test_fraction);
    if cut < m.dropped_warmup + 2 || cut >= frame.len() {
        return Err(CliError::Data {
            context: cell.to_string(),
            source: cyclecast::dataset::DatasetError::InvalidSplit(format!(
                "{} rows with {} warm-up rows cannot be split at fraction {test_fraction}",
                frame.len(),
                m.dropped_warmup
            ))
            .into(),
        });
    }
    let split = cut - m.dropped_warmup;
    let train = m.select_rows(0..split);
    let test = m.select_rows(split..m.n_rows());
    let start = Instant::now();
    let (model, _) = gbtree::fit(&train, params, None).map_err(CliError::data(format!("{cell}: training")))?;
    let secs = start.elapsed().as_secs_f64();
    let test_pred = model
        .predict(&test)
        .map_err(CliError::data(format!("{cell}: predicting")))?;
    let metrics = Metrics::compute(&test.target, &test_pred).map_err(CliError::data(format!("{cell}: scoring")))?;
    if !metrics.rmse.is_finite() {
        return Err(CliError::Internal(format!("{cell}: non-finite RMSE")));
    }
    Ok(Holdout {
        train,
        test,
        model,
        test_pred,
        metrics,
        secs,
    })
}

fn split_info(frame: &TimeSeriesFrame, h: &Holdout, test_fraction: f64) -> SplitInfo {
    SplitInfo {
        test_fraction,
        train_rows: h.train.n_rows(),
        test_rows: h.test.n_rows(),
        warmup_rows: frame.len() - h.train.n_rows() - h.test.n_rows(),
    }
}

pub fn cmd_synth(g: &Global, a: &SynthArgs) -> Result<String, CliError> {
    let cfg = synthetic_config(&a.synthetic, g.seed);
    let frame = generate_synthetic(&cfg).map_err(CliError::data("generating synthetic data"))?;
    let path = a.output.clone().unwrap_or_else(|| g.out.join("synthetic.csv"));
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    let file = File::create(&path).map_err(io_err(&path))?;
    write_csv(&frame, BufWriter::new(file), &CsvSchema::canonical()).map_err(CliError::data("writing CSV"))?;
    Ok(format!("wrote {} rows to {}\n", frame.len(), path.display()))
}

pub fn cmd_bench(g: &Global, a: &BenchArgs) -> Result<BenchReport, CliError> {
    let (frame, label) = load_frame(&a.data, g.seed)?;
    let spec = base_spec(g)?;
    let overrides = read_overrides(a.learner.params.as_ref())?;
    let encodings: Vec<EncodingStrategy> = match g.encoding {
        None => EncodingStrategy::ALL.to_vec(),
        Some(EncodingStrategy::Ordinal) => vec![EncodingStrategy::Ordinal],
        Some(e) => vec![EncodingStrategy::Ordinal, e],
    };
    let primary = g.encoding.unwrap_or(EncodingStrategy::Sinusoidal);
    let tf = a.learner.test_fraction;
    if a.learners.is_empty() {
        return Err(CliError::Usage("--learners is empty".into()));
    }

    let mut cells = Vec::new();
    let mut importances = Vec::new();
    // lowest-RMSE cell, for the diagnostics section
    let mut best: Option<(String, EncodingStrategy, Holdout)> = None;
    let mut split = None;
    for learner in &a.learners {
        let params = learner_params(learner, overrides.as_ref(), g.seed)?;
        for &enc in &encodings {
            let cell = format!("{learner}/{}", enc.as_str());
            let spec_e = spec.with_encoding(enc);
            let h = holdout(&frame, &spec_e, &params, tf, &cell)?;
            split.get_or_insert_with(|| split_info(&frame, &h, tf));
            ModelBundle {
                format_version: BUNDLE_FORMAT_VERSION,
                target: frame.target_name().to_string(),
                feature_spec: spec_e.clone(),
                model: h.model.clone(),
            }
            .save(&g.out.join("models").join(format!("{learner}-{}.json", enc.as_str())))?;
            if enc == primary {
                let fi = feature_importance(&h.model);
                importances.push(Importance {
                    learner: learner.clone(),
                    encoding: enc.as_str().into(),
                    no_splits: fi.no_splits,
                    shares: fi.shares,
                });
            }
            cells.push(BenchCell {
                learner: learner.clone(),
                encoding: enc.as_str().into(),
                metrics: h.metrics.clone(),
                trees: h.model.trees.len(),
                train_time_s: (!g.no_timing).then_some(h.secs),
            });
            if best.as_ref().is_none_or(|b| h.metrics.rmse < b.2.metrics.rmse) {
                best = Some((learner.clone(), enc, h));
            }
        }
    }

    let mut improvements = Vec::new();
    for learner in &a.learners {
        let rmse_of = |e: &str| {
            cells
                .iter()
                .find(|c| &c.learner == learner && c.encoding == e)
                .map(|c| c.metrics.rmse)
        };
        let Some(base) = rmse_of("ordinal") else { continue };
        for &enc in encodings.iter().filter(|e| **e != EncodingStrategy::Ordinal) {
            if let Some(r) = rmse_of(enc.as_str()) {
                improvements.push(Improvement {
                    learner: learner.clone(),
                    baseline: "ordinal".into(),
                    candidate: enc.as_str().into(),
                    relative_improvement_pct: 100.0 * (base - r) / base,
                });
            }
        }
    }

    let diagnostics = match best {
        Some((learner, enc, h)) => {
            let (y, p) = (&h.test.target, &h.test_pred);
            let residuals: Vec<f64> = y.iter().zip(p).map(|(a, b)| a - b).collect();
            Some(Diagnostics {
                learner,
                encoding: enc.as_str().into(),
                periods: period_breakdown(y, p, &h.test.hours()).map_err(CliError::data("period breakdown"))?,
                residuals: residual_stats(&residuals).map_err(CliError::data("residual statistics"))?,
            })
        }
        None => None,
    };

    let ablation = if a.no_ablation {
        None
    } else {
        let params = learner_params(&a.learners[0], overrides.as_ref(), g.seed)?;
        let groups = [
            FeatureGroup::Sinusoidal,
            FeatureGroup::RollingStats,
            FeatureGroup::LagFeatures,
        ];
        let (rows, info) = ablation_rows(&frame, &spec, &params, tf, &groups)?;
        Some(AblationReport {
            report: "ablation".into(),
            environment: Environment::new(g.seed, label.clone(), frame.len()),
            convention: DELTA_CONVENTION.into(),
            learner: a.learners[0].clone(),
            encoding: "full spec".into(),
            split: info,
            rows,
        })
    };

    let report = BenchReport {
        report: "bench".into(),
        environment: Environment::new(g.seed, label, frame.len()),
        convention: IMPROVEMENT_CONVENTION.into(),
        split: split.expect("at least one cell"),
        cells,
        improvements,
        feature_importance: importances,
        diagnostics,
        ablation,
    };
    write_json(&g.out.join("bench_report.json"), &report)?;
    Ok(report)
}

fn ablation_rows(
    frame: &TimeSeriesFrame,
    spec: &FeatureSpec,
    params: &HyperParams,
    tf: f64,
    groups: &[FeatureGroup],
) -> Result<(Vec<AblationRow>, SplitInfo), CliError> {
    let present: Vec<FeatureGroup> = spec.emitted_columns().into_iter().map(|c| c.1).collect();
    for gr in groups {
        if !present.contains(gr) {
            return Err(CliError::Usage(format!(
                "feature group `{gr}` is not present in the feature spec"
            )));
        }
    }
    let full = holdout(frame, spec, params, tf, "ablation/all")?;
    let info = split_info(frame, &full, tf);
    let base = full.metrics.rmse;
    let mut rows = vec![AblationRow {
        feature_set: "All Features".into(),
        rmse: base,
        r2: full.metrics.r2,
        delta_performance_pct: 0.0,
    }];
    for &gr in groups {
        let reduced = spec.ablate(gr).map_err(CliError::usage(format!("ablating {gr}")))?;
        let h = holdout(frame, &reduced, params, tf, &format!("ablation/{gr}"))?;
        rows.push(AblationRow {
            feature_set: gr.ablation_label().into(),
            rmse: h.metrics.rmse,
            r2: h.metrics.r2,
            delta_performance_pct: 100.0 * (h.metrics.rmse - base) / base,
        });
    }
    Ok((rows, info))
}

pub fn cmd_ablation(g: &Global, a: &AblationArgs) -> Result<AblationReport, CliError> {
    let (frame, label) = load_frame(&a.data, g.seed)?;
    let mut spec = base_spec(g)?;
    if let Some(e) = g.encoding {
        spec = spec.with_encoding(e);
    }
    let overrides = read_overrides(a.learner_args.params.as_ref())?;
    let params = learner_params(&a.learner, overrides.as_ref(), g.seed)?;
    let groups = a
        .groups
        .iter()
        .map(|s| s.parse::<FeatureGroup>().map_err(CliError::usage("--groups")))
        .collect::<Result<Vec<_>, _>>()?;
    let (rows, split) = ablation_rows(&frame, &spec, &params, a.learner_args.test_fraction, &groups)?;
    let report = AblationReport {
        report: "ablation".into(),
        environment: Environment::new(g.seed, label, frame.len()),
        convention: DELTA_CONVENTION.into(),
        learner: a.learner.clone(),
        encoding: g.encoding.map_or("full spec", EncodingStrategy::as_str).into(),
        split,
        rows,
    };
    write_json(&g.out.join("ablation_report.json"), &report)?;
    Ok(report)
}

pub fn cmd_tune(g: &Global, a: &TuneArgs) -> Result<TuneReport, CliError> {
    let (frame, label) = load_frame(&a.data, g.seed)?;
    let mut spec = base_spec(g)?;
    if let Some(e) = g.encoding {
        spec = spec.with_encoding(e);
    }
    if a.init < 2 || a.budget < a.init + 1 {
        return Err(CliError::Usage(format!(
            "--budget {} must be at least --init + 1 and --init ({}) at least 2",
            a.budget, a.init
        )));
    }
    // fail fast on an impossible plan
    cyclecast::evaluation::expanding_splits(frame.len(), a.folds, a.fold_width)
        .map_err(CliError::data("cross-validation plan"))?;

    let space = ParamSpace::default();
    let base = HyperParams {
        seed: g.seed,
        ..HyperParams::default()
    };
    let default_x = space.point_of(&base).map_err(|e| CliError::Internal(e.to_string()))?;

    ensure_dir(&g.out)?;
    let trials_path = g.out.join("trials.jsonl");
    let mut trials_out = BufWriter::new(File::create(&trials_path).map_err(io_err(&trials_path))?);
    let mut write_err: Option<std::io::Error> = None;

    let mut cv_runs: Vec<Option<CvResult>> = Vec::new();
    let evaluate = |x: &[f64]| -> Result<CvResult, String> {
        let p = space.apply(&base, x).map_err(|e| e.to_string())?;
        cross_validate(&frame, &spec, &p, a.folds, a.fold_width).map_err(|e| e.to_string())
    };
    let objective = |x: &[f64]| {
        let r = evaluate(x);
        let v = r.as_ref().map(|c| c.cv_score).map_err(Clone::clone);
        cv_runs.push(r.ok());
        v
    };
    let on_trial = |t: &Trial| {
        let mut t = t.clone();
        if g.no_timing {
            t.wall_time_s = None;
        }
        let line = serde_json::to_string(&t).expect("trial serialises");
        if let Err(e) = writeln!(trials_out, "{line}").and_then(|_| trials_out.flush()) {
            write_err.get_or_insert(e);
        }
    };
    let mut cfg = OptimizerConfig::new(a.budget, a.init, g.seed);
    cfg.seeded_points = vec![default_x.clone()];
    let result = optimize(&space, objective, &cfg, on_trial).map_err(CliError::data("tuning"))?;
    drop(trials_out);
    if let Some(e) = write_err {
        return Err(io_err(&trials_path)(e));
    }

    let best_i = result
        .trials
        .iter()
        .position(|t| t.objective == Some(result.best_objective))
        .ok_or_else(|| CliError::Internal("incumbent missing from trial history".into()))?;
    let best_cv = cv_runs[best_i]
        .clone()
        .ok_or_else(|| CliError::Internal("incumbent has no cross-validation result".into()))?;
    let best_x: Vec<f64> = result.best_point.values().copied().collect();
    let best_params = space
        .apply(&base, &best_x)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let default_cv_score = result.trials[0].objective;
    if default_cv_score.is_some_and(|d| result.best_objective > d) {
        return Err(CliError::Internal("incumbent is worse than the seeded default".into()));
    }

    let attribution = if a.no_attribution {
        Vec::new()
    } else {
        reversion_attribution(&space, &best_x, result.best_objective, &default_x, |x: &[f64]| {
            evaluate(x).map(|c| c.cv_score)
        })
        .map_err(|e| CliError::Internal(e.to_string()))?
    };

    let mut csv = String::from("iteration,incumbent_rmse\n");
    for (i, v) in result.incumbent_trace.iter().enumerate() {
        csv += &format!("{i},{}\n", v.map(|x| x.to_string()).unwrap_or_default());
    }
    write_text(&g.out.join("convergence.csv"), &csv)?;
    write_json(&g.out.join("best_params.json"), &best_params)?;

    let report = TuneReport {
        report: "tune".into(),
        environment: Environment::new(g.seed, label, frame.len()),
        folds: a.folds,
        fold_width: a.fold_width,
        budget: a.budget,
        init: a.init,
        default_cv_score,
        best_cv_score: result.best_objective,
        best_dispersion: best_cv.dispersion,
        best_stability: best_cv.stability,
        stability_definition: STABILITY_DEFINITION.into(),
        relative_improvement_pct: default_cv_score.map(|d| 100.0 * (d - result.best_objective) / d),
        best_params,
        attribution_protocol: ATTRIBUTION_PROTOCOL.into(),
        attribution,
        incumbent_trace: result.incumbent_trace,
    };
    write_json(&g.out.join("tune_report.json"), &report)?;
    Ok(report)
}

pub fn cmd_predict(g: &Global, a: &PredictArgs) -> Result<PredictReport, CliError> {
    let bundle = ModelBundle::load(&a.model)?;
    let headers = read_csv_headers(&a.data).map_err(CliError::data("reading CSV header"))?;
    let mut schema = CsvSchema::from_headers(headers.iter().map(String::as_str), &a.time_col, &bundle.target);
    schema.require_target = false;
    let frame = load_csv(&a.data, &schema).map_err(CliError::data(format!("loading {}", a.data.display())))?;
    let m = build_matrix(&frame, &bundle.feature_spec).map_err(CliError::data("building features"))?;

    let start = Instant::now();
    let pred = bundle.model.predict(&m).map_err(CliError::data("predicting"))?;
    let elapsed = start.elapsed().as_secs_f64();

    let path = a.output.clone().unwrap_or_else(|| g.out.join("predictions.csv"));
    let mut csv = String::from("timestamp,prediction\n");
    for (ts, p) in m.timestamps.iter().zip(&pred) {
        csv += &format!("{},{p}\n", ts.format(cyclecast::dataset::TIMESTAMP_FORMAT));
    }
    write_text(&path, &csv)?;

    let metrics = if m.target.is_empty() {
        None
    } else {
        Some(Metrics::compute(&m.target, &pred).map_err(CliError::data("scoring"))?)
    };
    let report = PredictReport {
        report: "predict".into(),
        rows: pred.len(),
        predictions_path: path.display().to_string(),
        metrics,
        mean_latency_us: (!g.no_timing && !pred.is_empty()).then(|| 1e6 * elapsed / pred.len() as f64),
    };
    write_json(&g.out.join("predict_report.json"), &report)?;
    Ok(report)
}
