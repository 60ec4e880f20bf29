//! Hourly measurement frames: CSV ingestion, synthetic generation and
//! order-preserving train/test splits.
//!
//! Column names inside a frame follow the household-power convention in
//! lower case (`global_active_power`, `voltage`, ...). [`CsvSchema`] maps them
//! to file headers, defaulting to the UCI spelling (`Global_active_power`).

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use chrono::{Datelike, NaiveDate, NaiveDateTime, TimeDelta, Timelike};
use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default prediction target.
pub const TARGET_COLUMN: &str = "global_active_power";

/// Internal column name and UCI header for each measured quantity.
pub const CANONICAL_COLUMNS: [(&str, &str); 7] = [
    ("global_active_power", "Global_active_power"),
    ("global_reactive_power", "Global_reactive_power"),
    ("voltage", "Voltage"),
    ("global_intensity", "Global_intensity"),
    ("sub_metering_1", "Sub_metering_1"),
    ("sub_metering_2", "Sub_metering_2"),
    ("sub_metering_3", "Sub_metering_3"),
];

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%d %H:%M:%S";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("column `{name}` (header `{header}`) not found in csv header")]
    MissingColumn { name: String, header: String },
    #[error("timestamp at row {row} ({timestamp}) is earlier than the previous row")]
    NonMonotonic { row: usize, timestamp: NaiveDateTime },
    #[error("duplicate timestamp {timestamp} at row {row}")]
    DuplicateTimestamp { row: usize, timestamp: NaiveDateTime },
    #[error("column `{name}` has {found} values, expected {expected}")]
    LengthMismatch {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),
    #[error("target column `{0}` is not present in the frame")]
    MissingTarget(String),
    #[error("frame has no rows")]
    Empty,
    #[error("every data row was rejected ({0} rows)")]
    AllRowsRejected(usize),
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
}

/// A row dropped during ingestion. `row` counts data rows from 0 (the header
/// is not counted).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedRow {
    pub row: usize,
    pub reason: String,
}

/// Ingestion metadata carried alongside a frame and echoed into reports.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameMeta {
    /// Consecutive timestamp pairs more than one hour apart.
    pub gap_count: usize,
    /// Hours absent from the grid spanned by the frame.
    pub missing_hours: i64,
    pub rejected_rows: Vec<RejectedRow>,
}

/// Time-indexed table of hourly measurements.
///
/// Timestamps are strictly increasing and every column has one value per
/// timestamp. Frames are immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesFrame {
    timestamps: Vec<NaiveDateTime>,
    columns: IndexMap<String, Vec<f64>>,
    target_name: String,
    meta: FrameMeta,
}

impl TimeSeriesFrame {
    /// Builds a labelled frame; `target_name` must name one of `columns`.
    pub fn new(
        timestamps: Vec<NaiveDateTime>,
        columns: Vec<(String, Vec<f64>)>,
        target_name: impl Into<String>,
    ) -> Result<Self, DatasetError> {
        let target_name = target_name.into();
        let frame = Self::new_unlabeled(timestamps, columns, target_name.clone())?;
        if !frame.columns.contains_key(&target_name) {
            return Err(DatasetError::MissingTarget(target_name));
        }
        Ok(frame)
    }

    /// Builds a frame whose target column may be absent, for inference-only inputs.
    pub fn new_unlabeled(
        timestamps: Vec<NaiveDateTime>,
        columns: Vec<(String, Vec<f64>)>,
        target_name: impl Into<String>,
    ) -> Result<Self, DatasetError> {
        if timestamps.is_empty() {
            return Err(DatasetError::Empty);
        }
        check_monotonic(&timestamps, |i| i)?;
        let mut map = IndexMap::with_capacity(columns.len());
        for (name, values) in columns {
            if values.len() != timestamps.len() {
                return Err(DatasetError::LengthMismatch {
                    name,
                    expected: timestamps.len(),
                    found: values.len(),
                });
            }
            if map.contains_key(&name) {
                return Err(DatasetError::DuplicateColumn(name));
            }
            map.insert(name, values);
        }
        let (gap_count, missing_hours) = count_gaps(&timestamps);
        Ok(Self {
            timestamps,
            columns: map,
            target_name: target_name.into(),
            meta: FrameMeta {
                gap_count,
                missing_hours,
                rejected_rows: Vec::new(),
            },
        })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn timestamps(&self) -> &[NaiveDateTime] {
        &self.timestamps
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.get(name).map(Vec::as_slice)
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(String::as_str)
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn has_target(&self) -> bool {
        self.columns.contains_key(&self.target_name)
    }

    pub fn target(&self) -> Result<&[f64], DatasetError> {
        self.column(&self.target_name)
            .ok_or_else(|| DatasetError::MissingTarget(self.target_name.clone()))
    }

    pub fn meta(&self) -> &FrameMeta {
        &self.meta
    }

    /// Rows in `range`, in order. Gap metadata is recomputed for the slice.
    pub fn slice(&self, range: Range<usize>) -> TimeSeriesFrame {
        let timestamps = self.timestamps[range.clone()].to_vec();
        let (gap_count, missing_hours) = count_gaps(&timestamps);
        let columns = self
            .columns
            .iter()
            .map(|(k, v)| (k.clone(), v[range.clone()].to_vec()))
            .collect();
        TimeSeriesFrame {
            timestamps,
            columns,
            target_name: self.target_name.clone(),
            meta: FrameMeta {
                gap_count,
                missing_hours,
                rejected_rows: Vec::new(),
            },
        }
    }
}

fn check_monotonic(timestamps: &[NaiveDateTime], row_of: impl Fn(usize) -> usize) -> Result<(), DatasetError> {
    for (i, pair) in timestamps.windows(2).enumerate() {
        if pair[1] == pair[0] {
            return Err(DatasetError::DuplicateTimestamp {
                row: row_of(i + 1),
                timestamp: pair[1],
            });
        }
        if pair[1] < pair[0] {
            return Err(DatasetError::NonMonotonic {
                row: row_of(i + 1),
                timestamp: pair[1],
            });
        }
    }
    Ok(())
}

fn count_gaps(timestamps: &[NaiveDateTime]) -> (usize, i64) {
    let hour = TimeDelta::hours(1);
    let mut gaps = 0;
    let mut missing = 0;
    for pair in timestamps.windows(2) {
        let step = pair[1] - pair[0];
        if step > hour {
            gaps += 1;
            missing += step.num_hours() - 1;
        }
    }
    (gaps, missing)
}

/// Accepts `YYYY-MM-DD HH:MM:SS`, the ISO-8601 `T` form, optional fractional
/// seconds, and minute-resolution variants.
pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    const FORMATS: [&str; 6] = [
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M",
        "%Y-%m-%dT%H:%M",
    ];
    let s = s.trim();
    FORMATS.iter().find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

/// Maps frame column names to CSV headers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub time_col: String,
    /// `(frame name, csv header)` pairs, in output order.
    pub columns: Vec<(String, String)>,
    pub target: String,
    /// When false the target column may be absent (inference inputs).
    #[serde(default = "default_true")]
    pub require_target: bool,
}

fn default_true() -> bool {
    true
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self::canonical()
    }
}

impl CsvSchema {
    /// The seven household-power measurements under their UCI headers.
    pub fn canonical() -> Self {
        Self {
            time_col: "timestamp".to_string(),
            columns: CANONICAL_COLUMNS
                .iter()
                .map(|(n, h)| (n.to_string(), h.to_string()))
                .collect(),
            target: TARGET_COLUMN.to_string(),
            require_target: true,
        }
    }

    /// Schema for an arbitrary CSV: every header except the time column is
    /// loaded. Canonical UCI headers are renamed to their frame names.
    pub fn from_headers<'a>(headers: impl IntoIterator<Item = &'a str>, time_col: &str, target: &str) -> Self {
        let columns = headers
            .into_iter()
            .filter(|h| *h != time_col)
            .map(|h| {
                let name = CANONICAL_COLUMNS
                    .iter()
                    .find(|(n, hdr)| *hdr == h || *n == h)
                    .map(|(n, _)| n.to_string())
                    .unwrap_or_else(|| h.to_string());
                (name, h.to_string())
            })
            .collect();
        Self {
            time_col: time_col.to_string(),
            columns,
            target: target.to_string(),
            require_target: true,
        }
    }

    pub fn with_time_col(mut self, time_col: impl Into<String>) -> Self {
        self.time_col = time_col.into();
        self
    }

    pub fn header_for(&self, name: &str) -> String {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, h)| h.clone())
            .unwrap_or_else(|| name.to_string())
    }
}

/// Reads the header row of a CSV file.
pub fn read_csv_headers(path: &Path) -> Result<Vec<String>, DatasetError> {
    let file = std::fs::File::open(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    Ok(reader.headers()?.iter().map(str::to_string).collect())
}

/// Loads a frame from a CSV file. See [`read_csv`].
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<TimeSeriesFrame, DatasetError> {
    let file = std::fs::File::open(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_csv(file, schema)
}

/// Parses CSV with a header row. Rows with an unparseable timestamp or a
/// missing/unparseable numeric cell are dropped and listed in
/// [`FrameMeta::rejected_rows`]; ordering violations among the remaining
/// rows are hard errors naming the offending data row.
pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<TimeSeriesFrame, DatasetError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = reader.headers()?.clone();
    let find = |h: &str| headers.iter().position(|x| x == h);

    let time_idx = find(&schema.time_col).ok_or_else(|| DatasetError::MissingColumn {
        name: schema.time_col.clone(),
        header: schema.time_col.clone(),
    })?;
    let mut mapped = Vec::with_capacity(schema.columns.len());
    for (name, header) in &schema.columns {
        match find(header) {
            Some(idx) => mapped.push((name.clone(), idx)),
            None if !schema.require_target && *name == schema.target => {}
            None => {
                return Err(DatasetError::MissingColumn {
                    name: name.clone(),
                    header: header.clone(),
                })
            }
        }
    }
    if schema.require_target && !mapped.iter().any(|(n, _)| *n == schema.target) {
        return Err(DatasetError::MissingColumn {
            name: schema.target.clone(),
            header: schema.header_for(&schema.target),
        });
    }

    let mut timestamps = Vec::new();
    let mut source_rows = Vec::new();
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); mapped.len()];
    let mut rejected = Vec::new();
    let mut row_buf = Vec::with_capacity(mapped.len());

    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let Some(ts) = record.get(time_idx).and_then(parse_timestamp) else {
            rejected.push(RejectedRow {
                row,
                reason: format!("unparseable timestamp `{}`", record.get(time_idx).unwrap_or("")),
            });
            continue;
        };
        row_buf.clear();
        let mut bad = None;
        for (name, idx) in &mapped {
            let cell = record.get(*idx).unwrap_or("");
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => row_buf.push(v),
                _ if cell.is_empty() => {
                    bad = Some(format!("missing value in `{name}`"));
                    break;
                }
                _ => {
                    bad = Some(format!("unparseable value `{cell}` in `{name}`"));
                    break;
                }
            }
        }
        if let Some(reason) = bad {
            rejected.push(RejectedRow { row, reason });
            continue;
        }
        timestamps.push(ts);
        source_rows.push(row);
        for (col, v) in values.iter_mut().zip(&row_buf) {
            col.push(*v);
        }
    }

    if timestamps.is_empty() {
        return Err(if rejected.is_empty() {
            DatasetError::Empty
        } else {
            DatasetError::AllRowsRejected(rejected.len())
        });
    }
    check_monotonic(&timestamps, |i| source_rows[i])?;

    let columns = mapped.into_iter().map(|(n, _)| n).zip(values).collect::<Vec<_>>();
    let mut frame = if schema.require_target {
        TimeSeriesFrame::new(timestamps, columns, schema.target.clone())?
    } else {
        TimeSeriesFrame::new_unlabeled(timestamps, columns, schema.target.clone())?
    };
    frame.meta.rejected_rows = rejected;
    Ok(frame)
}

/// Writes `frame` with canonical formatting: `YYYY-MM-DD HH:MM:SS`
/// timestamps and shortest round-trip decimal values.
pub fn write_csv<W: Write>(frame: &TimeSeriesFrame, writer: W, schema: &CsvSchema) -> Result<(), DatasetError> {
    let mut out = csv::Writer::from_writer(writer);
    let mut header = vec![schema.time_col.clone()];
    header.extend(frame.column_names().map(|n| schema.header_for(n)));
    out.write_record(&header)?;
    let cols: Vec<&[f64]> = frame.columns.values().map(Vec::as_slice).collect();
    let mut record = Vec::with_capacity(header.len());
    for (i, ts) in frame.timestamps.iter().enumerate() {
        record.clear();
        record.push(ts.format(TIMESTAMP_FORMAT).to_string());
        record.extend(cols.iter().map(|c| c[i].to_string()));
        out.write_record(&record)?;
    }
    out.flush().map_err(|source| DatasetError::Io {
        path: "<writer>".to_string(),
        source,
    })?;
    Ok(())
}

/// Parameters of the synthetic cyclic load generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n_hours: usize,
    pub base_level: f64,
    pub daily_amplitude: f64,
    pub weekly_amplitude: f64,
    /// Added per elapsed hour.
    pub trend_slope: f64,
    pub noise_std: f64,
    pub seed: u64,
    pub start: NaiveDateTime,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_hours: 8760,
            base_level: 2.0,
            daily_amplitude: 1.0,
            weekly_amplitude: 0.5,
            trend_slope: 0.0,
            noise_std: 0.3,
            seed: 42,
            start: NaiveDate::from_ymd_opt(2023, 1, 1)
                .and_then(|d| d.and_hms_opt(0, 0, 0))
                .expect("valid start date"),
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |m: &str| Err(DatasetError::InvalidConfig(m.to_string()));
        if self.n_hours < 1 {
            return bad("n_hours must be at least 1");
        }
        if !(self.noise_std >= 0.0) {
            return bad("noise_std must be non-negative");
        }
        if !(self.daily_amplitude >= 0.0 && self.weekly_amplitude >= 0.0) {
            return bad("amplitudes must be non-negative");
        }
        if !self.base_level.is_finite() || !self.trend_slope.is_finite() {
            return bad("base_level and trend_slope must be finite");
        }
        Ok(())
    }
}

/// Hours since Monday 00:00, in `0..168`.
pub fn hour_of_week(ts: &NaiveDateTime) -> u32 {
    ts.weekday().num_days_from_monday() * 24 + ts.hour()
}

/// Generates an hourly frame whose target is a daily sine plus a weekly sine
/// plus a linear trend and Gaussian noise. The remaining household-power
/// columns are derived from the target with their own noise.
///
/// Each column draws from its own ChaCha stream of `seed`, so the output is a
/// pure function of `config`.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<TimeSeriesFrame, DatasetError> {
    config.validate()?;
    let n = config.n_hours;
    let stream = |k: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(k);
        rng
    };
    let noise = |rng: &mut ChaCha8Rng, scale: f64| -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        scale * z
    };

    let timestamps: Vec<NaiveDateTime> = (0..n).map(|i| config.start + TimeDelta::hours(i as i64)).collect();

    let mut rng = stream(0);
    let target: Vec<f64> = timestamps
        .iter()
        .enumerate()
        .map(|(t, ts)| {
            let daily = (2.0 * PI * ts.hour() as f64 / 24.0).sin();
            let weekly = (2.0 * PI * hour_of_week(ts) as f64 / 168.0).sin();
            config.base_level
                + config.daily_amplitude * daily
                + config.weekly_amplitude * weekly
                + config.trend_slope * t as f64
                + noise(&mut rng, config.noise_std)
        })
        .collect();

    let s = config.noise_std;
    let mut rng = stream(1);
    let reactive: Vec<f64> = target
        .iter()
        .map(|p| (0.12 * p.abs() + noise(&mut rng, 0.05 * s)).max(0.0))
        .collect();
    let mut rng = stream(2);
    let voltage: Vec<f64> = target
        .iter()
        .map(|p| 240.0 - 1.5 * (p - config.base_level) + noise(&mut rng, 2.0 * s))
        .collect();
    let mut rng = stream(3);
    let intensity: Vec<f64> = target
        .iter()
        .zip(&voltage)
        .map(|(p, v)| (p.abs() * 1000.0 / v + noise(&mut rng, 0.2 * s)).max(0.0))
        .collect();
    let sub_meter = |k: u64, share: f64| -> Vec<f64> {
        let mut rng = stream(k);
        target
            .iter()
            .map(|p| (share * p.abs() * 1000.0 + noise(&mut rng, 30.0 * s)).max(0.0))
            .collect()
    };

    let (sub1, sub2, sub3) = (sub_meter(4, 0.08), sub_meter(5, 0.12), sub_meter(6, 0.35));
    let columns = vec![
        (CANONICAL_COLUMNS[0].0.to_string(), target),
        (CANONICAL_COLUMNS[1].0.to_string(), reactive),
        (CANONICAL_COLUMNS[2].0.to_string(), voltage),
        (CANONICAL_COLUMNS[3].0.to_string(), intensity),
        (CANONICAL_COLUMNS[4].0.to_string(), sub1),
        (CANONICAL_COLUMNS[5].0.to_string(), sub2),
        (CANONICAL_COLUMNS[6].0.to_string(), sub3),
    ];
    TimeSeriesFrame::new(timestamps, columns, TARGET_COLUMN)
}

/// Number of training rows kept by [`temporal_split`]: `ceil((1 - f) * n)`,
/// with a small tolerance so that products such as `0.7 * 10` are not pushed
/// up by binary rounding.
pub fn split_point(n: usize, test_fraction: f64) -> usize {
    let x = (1.0 - test_fraction) * n as f64;
    (x - 1e-9 * x.abs().max(1.0)).ceil().max(0.0) as usize
}

/// Splits into a leading training block of `ceil((1 - test_fraction) * n)`
/// rows and the trailing remainder. Rows are never reordered.
pub fn temporal_split(
    frame: &TimeSeriesFrame,
    test_fraction: f64,
) -> Result<(TimeSeriesFrame, TimeSeriesFrame), DatasetError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DatasetError::InvalidSplit(format!(
            "test fraction {test_fraction} is outside (0, 1)"
        )));
    }
    let n = frame.len();
    if n < 2 {
        return Err(DatasetError::InvalidSplit(format!(
            "need at least 2 rows, frame has {n}"
        )));
    }
    let n_train = split_point(n, test_fraction);
    if n_train == 0 || n_train >= n {
        return Err(DatasetError::InvalidSplit(format!(
            "fraction {test_fraction} on {n} rows leaves an empty partition \
             ({n_train} train / {} test)",
            n - n_train.min(n)
        )));
    }
    Ok((frame.slice(0..n_train), frame.slice(n_train..n)))
}
