//! Design-matrix construction: rolling statistics, lags, exponentially
//! weighted means and temporal encodings, grouped for ablation.
//!
//! Every derived feature looks backwards only. By default rolling and EWM
//! statistics summarise the target up to the previous hour, so a row never
//! contains the value it is asked to predict; set
//! [`FeatureSpec::include_current`] to let windows end at the current row.

use std::collections::HashSet;
use std::fmt;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use chrono::{NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::TimeSeriesFrame;
use crate::encoding::{self, ColumnBlock, CyclicFeature, EncodingError, EncodingStrategy};

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("invalid feature spec: {0}")]
    InvalidSpec(String),
    #[error("window {window} exceeds series length {len}")]
    WindowTooLarge { window: usize, len: usize },
    #[error("rolling std needs a window of at least 2, got {0}")]
    WindowTooSmall(usize),
    #[error("lag {lag} must be in [1, {len})")]
    BadLag { lag: usize, len: usize },
    #[error("half-life must be positive and finite, got {0}")]
    BadHalflife(f64),
    #[error("empty series")]
    EmptySeries,
    #[error("frame has {rows} rows but the spec needs at least {needed} for warm-up")]
    FrameTooShort { rows: usize, needed: usize },
    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),
    #[error("non-finite value in column `{column}` at row {row}")]
    NonFinite { column: String, row: usize },
    #[error("unknown feature group `{0}`")]
    UnknownGroup(String),
    #[error("ablation would remove every column")]
    NothingLeft,
    #[error("lag and rolling features need the target column `{0}`")]
    TargetRequired(String),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
}

/// A series whose first `defined_from` positions are undefined (stored as NaN).
#[derive(Debug, Clone, PartialEq)]
pub struct Trailing {
    pub values: Vec<f64>,
    pub defined_from: usize,
}

impl Trailing {
    fn new(values: Vec<f64>, defined_from: usize) -> Self {
        Self { values, defined_from }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        (i >= self.defined_from).then(|| self.values[i])
    }

    /// Shifts forward by `k` positions: position `t` takes the value at `t - k`.
    fn shifted(&self, k: usize) -> Trailing {
        let n = self.values.len();
        let mut values = vec![f64::NAN; n];
        if k < n {
            values[k..].copy_from_slice(&self.values[..n - k]);
        }
        Trailing::new(values, (self.defined_from + k).min(n))
    }
}

/// Trailing-window mean and sum of squared deviations. Each window is
/// summed directly (two passes over `w` values): sliding updates drift enough
/// to matter once a square root is taken over a near-constant window.
fn window_moments(series: &[f64], w: usize) -> (Vec<f64>, Vec<f64>) {
    let n = series.len();
    let mut means = vec![f64::NAN; n];
    let mut m2s = vec![f64::NAN; n];
    for t in w - 1..n {
        let win = &series[t + 1 - w..=t];
        let mean = win.iter().sum::<f64>() / w as f64;
        means[t] = mean;
        m2s[t] = win.iter().map(|x| (x - mean) * (x - mean)).sum();
    }
    (means, m2s)
}

/// Mean of the `w` values ending at each position (inclusive).
pub fn rolling_mean(series: &[f64], w: usize) -> Result<Trailing, FeatureError> {
    if w == 0 {
        return Err(FeatureError::InvalidSpec("window must be at least 1".into()));
    }
    if w > series.len() {
        return Err(FeatureError::WindowTooLarge {
            window: w,
            len: series.len(),
        });
    }
    let (means, _) = window_moments(series, w);
    Ok(Trailing::new(means, w - 1))
}

/// Sample standard deviation (denominator `w - 1`) of the `w` values ending
/// at each position.
pub fn rolling_std(series: &[f64], w: usize) -> Result<Trailing, FeatureError> {
    if w < 2 {
        return Err(FeatureError::WindowTooSmall(w));
    }
    if w > series.len() {
        return Err(FeatureError::WindowTooLarge {
            window: w,
            len: series.len(),
        });
    }
    let (_, m2s) = window_moments(series, w);
    let denom = (w - 1) as f64;
    let values = m2s
        .into_iter()
        .map(|m2| if m2.is_nan() { m2 } else { (m2 / denom).sqrt() })
        .collect();
    Ok(Trailing::new(values, w - 1))
}

/// `series[t - k]` at position `t`.
pub fn lag(series: &[f64], k: usize) -> Result<Trailing, FeatureError> {
    if k == 0 || k >= series.len() {
        return Err(FeatureError::BadLag {
            lag: k,
            len: series.len(),
        });
    }
    Ok(Trailing::new(series.to_vec(), 0).shifted(k))
}

/// Smoothing factor for a half-life in steps: `1 - 2^(-1/h)`.
pub fn ewm_alpha(halflife: f64) -> f64 {
    1.0 - (-1.0 / halflife).exp2()
}

/// `e_t = α y_t + (1 - α) e_{t-1}` with `e_0 = y_0`.
pub fn ewm_mean(series: &[f64], halflife: f64) -> Result<Vec<f64>, FeatureError> {
    if !(halflife > 0.0) || halflife.is_nan() {
        return Err(FeatureError::BadHalflife(halflife));
    }
    let (&first, rest) = series.split_first().ok_or(FeatureError::EmptySeries)?;
    let alpha = ewm_alpha(halflife);
    let mut out = Vec::with_capacity(series.len());
    let mut e = first;
    out.push(e);
    for &y in rest {
        e = alpha * y + (1.0 - alpha) * e;
        out.push(e);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RollingStat {
    Mean,
    Std,
}

/// Ablation groups. Every emitted column belongs to exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureGroup {
    /// `*_sin` / `*_cos` temporal columns.
    Sinusoidal,
    /// Rolling means and standard deviations.
    RollingStats,
    /// Lagged target values.
    LagFeatures,
    /// Ordinal and one-hot temporal columns, EWM columns.
    Others,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 4] = [
        FeatureGroup::Sinusoidal,
        FeatureGroup::RollingStats,
        FeatureGroup::LagFeatures,
        FeatureGroup::Others,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureGroup::Sinusoidal => "sinusoidal",
            FeatureGroup::RollingStats => "rolling_stats",
            FeatureGroup::LagFeatures => "lag_features",
            FeatureGroup::Others => "others",
        }
    }

    /// Row label used in ablation tables.
    pub fn ablation_label(self) -> &'static str {
        match self {
            FeatureGroup::Sinusoidal => "No Sinusoidal",
            FeatureGroup::RollingStats => "No Rolling Stats",
            FeatureGroup::LagFeatures => "No Lag Features",
            FeatureGroup::Others => "No Others",
        }
    }
}

impl fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureGroup {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "sinusoidal" => Ok(FeatureGroup::Sinusoidal),
            "rollingstats" | "rolling" => Ok(FeatureGroup::RollingStats),
            "lagfeatures" | "lags" | "lag" => Ok(FeatureGroup::LagFeatures),
            "others" | "other" => Ok(FeatureGroup::Others),
            _ => Err(FeatureError::UnknownGroup(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TemporalEncoding {
    pub feature: CyclicFeature,
    pub strategy: EncodingStrategy,
}

impl TemporalEncoding {
    pub fn new(feature: CyclicFeature, strategy: EncodingStrategy) -> Self {
        Self { feature, strategy }
    }

    pub fn group(&self) -> FeatureGroup {
        match self.strategy {
            EncodingStrategy::Sinusoidal => FeatureGroup::Sinusoidal,
            _ => FeatureGroup::Others,
        }
    }
}

/// Declarative recipe for a design matrix. Serialised as the `--features`
/// JSON config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureSpec {
    pub temporal: Vec<TemporalEncoding>,
    pub rolling_windows: Vec<usize>,
    pub rolling_stats: Vec<RollingStat>,
    pub lags: Vec<usize>,
    pub ewm_halflives: Vec<f64>,
    /// Let rolling and EWM windows end at the current row instead of the
    /// previous one.
    pub include_current: bool,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        use EncodingStrategy::{Ordinal, Sinusoidal};
        Self {
            temporal: vec![
                TemporalEncoding::new(CyclicFeature::hour(), Sinusoidal),
                TemporalEncoding::new(CyclicFeature::day_of_week(), Sinusoidal),
                TemporalEncoding::new(CyclicFeature::hour(), Ordinal),
                TemporalEncoding::new(CyclicFeature::day_of_week(), Ordinal),
            ],
            rolling_windows: vec![6, 12, 24],
            rolling_stats: vec![RollingStat::Mean, RollingStat::Std],
            lags: vec![1, 2, 24, 168],
            ewm_halflives: vec![12.0],
            include_current: false,
        }
    }
}

fn hours_label(h: f64) -> String {
    if h.fract() == 0.0 && h.abs() < 1e15 {
        format!("{}h", h as i64)
    } else {
        format!("{h}h")
    }
}

impl FeatureSpec {
    /// Calendar encodings only, each feature under `strategy`.
    pub fn temporal_only(features: &[CyclicFeature], strategy: EncodingStrategy) -> Self {
        Self {
            temporal: features
                .iter()
                .map(|f| TemporalEncoding::new(f.clone(), strategy))
                .collect(),
            rolling_windows: Vec::new(),
            rolling_stats: Vec::new(),
            lags: Vec::new(),
            ewm_halflives: Vec::new(),
            include_current: false,
        }
    }

    pub fn from_json_file(path: &Path) -> crate::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| crate::Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let spec: FeatureSpec = serde_json::from_str(&text).map_err(|source| crate::Error::Json {
            path: path.display().to_string(),
            source,
        })?;
        spec.validate()?;
        Ok(spec)
    }

    /// Same spec with every temporal feature re-encoded under `strategy`
    /// (features appearing under several strategies are kept once).
    pub fn with_encoding(&self, strategy: EncodingStrategy) -> Self {
        let mut seen = HashSet::new();
        let temporal = self
            .temporal
            .iter()
            .filter(|t| seen.insert(t.feature.clone()))
            .map(|t| TemporalEncoding::new(t.feature.clone(), strategy))
            .collect();
        Self {
            temporal,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        if let Some(w) = self.rolling_windows.iter().find(|&&w| w < 2) {
            return Err(FeatureError::InvalidSpec(format!("rolling window {w} < 2")));
        }
        if !self.rolling_windows.is_empty() && self.rolling_stats.is_empty() {
            return Err(FeatureError::InvalidSpec(
                "rolling windows given without any rolling statistic".into(),
            ));
        }
        if self.lags.contains(&0) {
            return Err(FeatureError::InvalidSpec("lag 0 would copy the target".into()));
        }
        if let Some(&h) = self.ewm_halflives.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
            return Err(FeatureError::BadHalflife(h));
        }
        let mut seen = HashSet::new();
        for (name, _) in self.emitted_columns() {
            if !seen.insert(name.clone()) {
                return Err(FeatureError::DuplicateColumn(name));
            }
        }
        Ok(())
    }

    fn uses_target(&self) -> bool {
        !(self.rolling_windows.is_empty() && self.lags.is_empty() && self.ewm_halflives.is_empty())
    }

    /// Shift applied to the target before rolling/EWM statistics.
    fn stat_shift(&self) -> usize {
        usize::from(!self.include_current)
    }

    /// Leading rows where at least one column is undefined.
    pub fn warmup(&self) -> usize {
        let shift = self.stat_shift();
        let lag = self.lags.iter().copied().max().unwrap_or(0);
        let window = self.rolling_windows.iter().map(|w| w - 1 + shift).max().unwrap_or(0);
        let ewm = if self.ewm_halflives.is_empty() { 0 } else { shift };
        lag.max(window).max(ewm)
    }

    /// Column names and groups in emission order: temporal, rolling, lag, ewm.
    pub fn emitted_columns(&self) -> Vec<(String, FeatureGroup)> {
        let mut out = Vec::new();
        for t in &self.temporal {
            let g = t.group();
            out.extend(
                encoding::column_names(&t.feature, t.strategy)
                    .into_iter()
                    .map(|n| (n, g)),
            );
        }
        for w in &self.rolling_windows {
            for stat in &self.rolling_stats {
                let kind = match stat {
                    RollingStat::Mean => "mean",
                    RollingStat::Std => "std",
                };
                out.push((format!("rolling_{kind}_{w}h"), FeatureGroup::RollingStats));
            }
        }
        for k in &self.lags {
            out.push((format!("lag_{k}h"), FeatureGroup::LagFeatures));
        }
        for h in &self.ewm_halflives {
            out.push((format!("ewm_{}", hours_label(*h)), FeatureGroup::Others));
        }
        out
    }

    /// Removes every column of `group`. Ablating an already-absent group is a
    /// no-op; removing the last remaining columns is an error.
    pub fn ablate(&self, group: FeatureGroup) -> Result<FeatureSpec, FeatureError> {
        let mut spec = self.clone();
        match group {
            FeatureGroup::Sinusoidal => spec.temporal.retain(|t| t.strategy != EncodingStrategy::Sinusoidal),
            FeatureGroup::RollingStats => spec.rolling_windows.clear(),
            FeatureGroup::LagFeatures => spec.lags.clear(),
            FeatureGroup::Others => {
                spec.temporal.retain(|t| t.strategy == EncodingStrategy::Sinusoidal);
                spec.ewm_halflives.clear();
            }
        }
        if spec.emitted_columns().is_empty() {
            return Err(FeatureError::NothingLeft);
        }
        Ok(spec)
    }
}

/// Convenience wrapper around [`FeatureSpec::ablate`] taking a group name.
pub fn ablate(spec: &FeatureSpec, group: &str) -> Result<FeatureSpec, FeatureError> {
    spec.ablate(group.parse()?)
}

/// Dense column-major design matrix with row-aligned targets.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub column_names: Vec<String>,
    pub groups: Vec<FeatureGroup>,
    pub columns: Vec<Vec<f64>>,
    /// Empty when the source frame had no target column.
    pub target: Vec<f64>,
    pub timestamps: Vec<NaiveDateTime>,
    pub dropped_warmup: usize,
}

impl FeatureMatrix {
    /// Builds a matrix directly from columns (all rows retained).
    pub fn from_columns(
        column_names: Vec<String>,
        columns: Vec<Vec<f64>>,
        target: Vec<f64>,
    ) -> Result<Self, FeatureError> {
        let n = columns.first().map_or(target.len(), Vec::len);
        if columns.len() != column_names.len() || columns.iter().any(|c| c.len() != n) {
            return Err(FeatureError::InvalidSpec("ragged columns".into()));
        }
        if !target.is_empty() && target.len() != n {
            return Err(FeatureError::InvalidSpec("target length differs from rows".into()));
        }
        let groups = vec![FeatureGroup::Others; columns.len()];
        Ok(Self {
            column_names,
            groups,
            columns,
            target,
            timestamps: Vec::new(),
            dropped_warmup: 0,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(self.target.len(), Vec::len)
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn is_labeled(&self) -> bool {
        !self.target.is_empty() || self.n_rows() == 0
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.columns[col][row]
    }

    pub fn row(&self, row: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[row]).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|n| n == name)
    }

    /// Hour of day per row, when timestamps are known.
    pub fn hours(&self) -> Vec<u32> {
        self.timestamps.iter().map(|t| t.hour()).collect()
    }

    pub fn select_rows(&self, range: Range<usize>) -> FeatureMatrix {
        FeatureMatrix {
            column_names: self.column_names.clone(),
            groups: self.groups.clone(),
            columns: self.columns.iter().map(|c| c[range.clone()].to_vec()).collect(),
            target: if self.target.is_empty() {
                Vec::new()
            } else {
                self.target[range.clone()].to_vec()
            },
            timestamps: if self.timestamps.is_empty() {
                Vec::new()
            } else {
                self.timestamps[range.clone()].to_vec()
            },
            dropped_warmup: self.dropped_warmup,
        }
    }

    /// First row index at or after `ts`.
    pub fn row_at_or_after(&self, ts: NaiveDateTime) -> usize {
        self.timestamps.partition_point(|t| *t < ts)
    }
}

/// Materialises `spec` over `frame`, dropping the leading warm-up rows.
pub fn build_matrix(frame: &TimeSeriesFrame, spec: &FeatureSpec) -> Result<FeatureMatrix, FeatureError> {
    spec.validate()?;
    let emitted = spec.emitted_columns();
    if emitted.is_empty() {
        return Err(FeatureError::InvalidSpec("spec emits no columns".into()));
    }
    let n = frame.len();
    let warmup = spec.warmup();
    if n <= warmup {
        return Err(FeatureError::FrameTooShort {
            rows: n,
            needed: warmup + 1,
        });
    }
    let target = frame.target().ok();
    if spec.uses_target() && target.is_none() {
        return Err(FeatureError::TargetRequired(frame.target_name().to_string()));
    }

    let mut block = ColumnBlock::default();
    for t in &spec.temporal {
        encoding::append_encoded(&mut block, frame.timestamps(), &t.feature, t.strategy)?;
    }
    let mut columns: Vec<Vec<f64>> = block.columns;

    if let Some(y) = target {
        let shift = spec.stat_shift();
        for &w in &spec.rolling_windows {
            for stat in &spec.rolling_stats {
                let s = match stat {
                    RollingStat::Mean => rolling_mean(y, w)?,
                    RollingStat::Std => rolling_std(y, w)?,
                };
                columns.push(s.shifted(shift).values);
            }
        }
        for &k in &spec.lags {
            columns.push(lag(y, k)?.values);
        }
        for &h in &spec.ewm_halflives {
            let e = Trailing::new(ewm_mean(y, h)?, 0);
            columns.push(e.shifted(shift).values);
        }
    }
    debug_assert_eq!(columns.len(), emitted.len());

    let (column_names, groups): (Vec<String>, Vec<FeatureGroup>) = emitted.into_iter().unzip();
    let columns: Vec<Vec<f64>> = columns.into_iter().map(|c| c[warmup..].to_vec()).collect();
    for (name, col) in column_names.iter().zip(&columns) {
        if let Some(row) = col.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite {
                column: name.clone(),
                row: row + warmup,
            });
        }
    }
    Ok(FeatureMatrix {
        column_names,
        groups,
        columns,
        target: target.map(|y| y[warmup..].to_vec()).unwrap_or_default(),
        timestamps: frame.timestamps()[warmup..].to_vec(),
        dropped_warmup: warmup,
    })
}
