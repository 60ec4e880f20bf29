//! Encodings for cyclic calendar phases.
//!
//! A phase `t` with period `P` (hour of day, day of week, ...) can be fed to a
//! model as a raw ordinal, as `P` indicator columns, or as the point
//! `(sin 2πt/P, cos 2πt/P)` on the unit circle. Only the last keeps the end
//! of one period adjacent to the start of the next.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EncodingError {
    #[error("phase {phase} is outside [0, {period})")]
    PhaseOutOfRange { phase: u32, period: u32 },
    #[error("period must be at least 2, got {0}")]
    PeriodTooSmall(u32),
    #[error("duplicate output column `{0}`")]
    DuplicateColumn(String),
    #[error("cannot encode an empty frame")]
    EmptyInput,
    #[error("unknown encoding `{0}` (expected ordinal, onehot or sinusoidal)")]
    UnknownStrategy(String),
}

/// Calendar quantity extracted from a timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalendarUnit {
    Minute,
    Hour,
    DayOfWeek,
    HourOfWeek,
    Month,
}

impl CalendarUnit {
    pub fn period(self) -> u32 {
        match self {
            CalendarUnit::Minute => 60,
            CalendarUnit::Hour => 24,
            CalendarUnit::DayOfWeek => 7,
            CalendarUnit::HourOfWeek => 168,
            CalendarUnit::Month => 12,
        }
    }

    /// Phase in `0..period()`. Weeks start on Monday, months at January = 0.
    pub fn phase(self, ts: &NaiveDateTime) -> u32 {
        match self {
            CalendarUnit::Minute => ts.minute(),
            CalendarUnit::Hour => ts.hour(),
            CalendarUnit::DayOfWeek => ts.weekday().num_days_from_monday(),
            CalendarUnit::HourOfWeek => ts.weekday().num_days_from_monday() * 24 + ts.hour(),
            CalendarUnit::Month => ts.month0(),
        }
    }

    pub fn default_name(self) -> &'static str {
        match self {
            CalendarUnit::Minute => "minute",
            CalendarUnit::Hour => "hour",
            CalendarUnit::DayOfWeek => "dayofweek",
            CalendarUnit::HourOfWeek => "hourofweek",
            CalendarUnit::Month => "month",
        }
    }
}

/// A named cyclic quantity with its period.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CyclicFeature {
    pub name: String,
    pub unit: CalendarUnit,
}

impl CyclicFeature {
    pub fn new(unit: CalendarUnit) -> Self {
        Self {
            name: unit.default_name().to_string(),
            unit,
        }
    }

    pub fn hour() -> Self {
        Self::new(CalendarUnit::Hour)
    }

    pub fn day_of_week() -> Self {
        Self::new(CalendarUnit::DayOfWeek)
    }

    pub fn month() -> Self {
        Self::new(CalendarUnit::Month)
    }

    pub fn period(&self) -> u32 {
        self.unit.period()
    }

    pub fn phase(&self, ts: &NaiveDateTime) -> u32 {
        self.unit.phase(ts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncodingStrategy {
    Ordinal,
    OneHot,
    Sinusoidal,
}

impl EncodingStrategy {
    pub const ALL: [EncodingStrategy; 3] = [
        EncodingStrategy::Ordinal,
        EncodingStrategy::OneHot,
        EncodingStrategy::Sinusoidal,
    ];

    /// Columns emitted for one feature of the given period.
    pub fn width(self, period: u32) -> usize {
        match self {
            EncodingStrategy::Ordinal => 1,
            EncodingStrategy::OneHot => period as usize,
            EncodingStrategy::Sinusoidal => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EncodingStrategy::Ordinal => "ordinal",
            EncodingStrategy::OneHot => "onehot",
            EncodingStrategy::Sinusoidal => "sinusoidal",
        }
    }
}

impl fmt::Display for EncodingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EncodingStrategy {
    type Err = EncodingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ordinal" => Ok(EncodingStrategy::Ordinal),
            "onehot" | "one-hot" | "one_hot" => Ok(EncodingStrategy::OneHot),
            "sinusoidal" | "sin" => Ok(EncodingStrategy::Sinusoidal),
            _ => Err(EncodingError::UnknownStrategy(s.to_string())),
        }
    }
}

fn check_phase(t: u32, period: u32) -> Result<(), EncodingError> {
    if period < 2 {
        return Err(EncodingError::PeriodTooSmall(period));
    }
    if t >= period {
        return Err(EncodingError::PhaseOutOfRange { phase: t, period });
    }
    Ok(())
}

/// `(sin 2πt/P, cos 2πt/P)`.
pub fn encode_sinusoidal(t: u32, period: u32) -> Result<(f64, f64), EncodingError> {
    check_phase(t, period)?;
    let angle = 2.0 * PI * (t as f64 / period as f64);
    Ok(angle.sin_cos())
}

/// Euclidean distance between the sinusoidal encodings of two phases.
pub fn cyclic_distance(t1: u32, t2: u32, period: u32) -> Result<f64, EncodingError> {
    let (s1, c1) = encode_sinusoidal(t1, period)?;
    let (s2, c2) = encode_sinusoidal(t2, period)?;
    Ok((s1 - s2).hypot(c1 - c2))
}

pub fn encode_ordinal(t: u32) -> f64 {
    t as f64
}

pub fn encode_onehot(t: u32, period: u32) -> Result<Vec<f64>, EncodingError> {
    check_phase(t, period)?;
    let mut v = vec![0.0; period as usize];
    v[t as usize] = 1.0;
    Ok(v)
}

/// Output column names for one feature under `strategy`.
pub fn column_names(feature: &CyclicFeature, strategy: EncodingStrategy) -> Vec<String> {
    match strategy {
        EncodingStrategy::Ordinal => vec![feature.name.clone()],
        EncodingStrategy::Sinusoidal => {
            vec![format!("{}_sin", feature.name), format!("{}_cos", feature.name)]
        }
        EncodingStrategy::OneHot => (0..feature.period()).map(|k| format!("{}_{k}", feature.name)).collect(),
    }
}

/// Named columns produced by an encoding, in emission order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ColumnBlock {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl ColumnBlock {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    fn push(&mut self, name: String, column: Vec<f64>) -> Result<(), EncodingError> {
        if self.names.contains(&name) {
            return Err(EncodingError::DuplicateColumn(name));
        }
        self.names.push(name);
        self.columns.push(column);
        Ok(())
    }
}

/// Encodes one feature over a run of timestamps.
pub fn encode_feature(
    timestamps: &[NaiveDateTime],
    feature: &CyclicFeature,
    strategy: EncodingStrategy,
) -> Result<ColumnBlock, EncodingError> {
    let mut block = ColumnBlock::default();
    append_encoded(&mut block, timestamps, feature, strategy)?;
    Ok(block)
}

pub(crate) fn append_encoded(
    block: &mut ColumnBlock,
    timestamps: &[NaiveDateTime],
    feature: &CyclicFeature,
    strategy: EncodingStrategy,
) -> Result<(), EncodingError> {
    let period = feature.period();
    let phases: Vec<u32> = timestamps.iter().map(|ts| feature.phase(ts)).collect();
    let names = column_names(feature, strategy);
    match strategy {
        EncodingStrategy::Ordinal => {
            let col = phases.iter().map(|&t| encode_ordinal(t)).collect();
            block.push(names.into_iter().next().expect("one name"), col)?;
        }
        EncodingStrategy::Sinusoidal => {
            let mut sin = Vec::with_capacity(phases.len());
            let mut cos = Vec::with_capacity(phases.len());
            for &t in &phases {
                let (s, c) = encode_sinusoidal(t, period)?;
                sin.push(s);
                cos.push(c);
            }
            let mut names = names.into_iter();
            block.push(names.next().expect("sin name"), sin)?;
            block.push(names.next().expect("cos name"), cos)?;
        }
        EncodingStrategy::OneHot => {
            for (k, name) in names.into_iter().enumerate() {
                let col = phases
                    .iter()
                    .map(|&t| if t as usize == k { 1.0 } else { 0.0 })
                    .collect();
                block.push(name, col)?;
            }
        }
    }
    Ok(())
}

/// Encodes every feature in `features` with the same strategy.
pub fn expand_temporal(
    timestamps: &[NaiveDateTime],
    features: &[CyclicFeature],
    strategy: EncodingStrategy,
) -> Result<ColumnBlock, EncodingError> {
    if timestamps.is_empty() {
        return Err(EncodingError::EmptyInput);
    }
    let mut block = ColumnBlock::default();
    for f in features {
        append_encoded(&mut block, timestamps, f, strategy)?;
    }
    Ok(block)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn at_hour(h: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2023, 3, 6)
            .unwrap()
            .and_hms_opt(h, 0, 0)
            .unwrap()
    }

    #[test]
    fn sinusoidal_quarter_points() {
        let (s, c) = encode_sinusoidal(0, 24).unwrap();
        assert_eq!((s, c), (0.0, 1.0));
        let (s, c) = encode_sinusoidal(6, 24).unwrap();
        assert!((s - 1.0).abs() < 1e-15 && c.abs() < 1e-15);
    }

    #[test]
    fn sinusoidal_hour_23() {
        // sin(23π/12) = -sin(π/12) = -(√6 - √2)/4, cos(23π/12) = (√6 + √2)/4
        let (s, c) = encode_sinusoidal(23, 24).unwrap();
        let r6 = 6f64.sqrt();
        let r2 = 2f64.sqrt();
        assert!((s - (-(r6 - r2) / 4.0)).abs() < 1e-15);
        assert!((c - (r6 + r2) / 4.0).abs() < 1e-15);
        assert!((s + 0.258_819_045_102_520_7).abs() < 1e-12);
        assert!((c - 0.965_925_826_289_068_3).abs() < 1e-12);
    }

    #[test]
    fn phase_and_period_errors() {
        assert_eq!(
            encode_sinusoidal(24, 24),
            Err(EncodingError::PhaseOutOfRange { phase: 24, period: 24 })
        );
        assert_eq!(encode_sinusoidal(0, 1), Err(EncodingError::PeriodTooSmall(1)));
        assert!(cyclic_distance(3, 7, 7).is_err());
        assert!(encode_onehot(7, 7).is_err());
    }

    #[test]
    fn cyclic_distance_examples() {
        let wrap = cyclic_distance(23, 0, 24).unwrap();
        let adj = cyclic_distance(0, 1, 24).unwrap();
        assert!((wrap - adj).abs() < 1e-12);
        assert!((cyclic_distance(0, 12, 24).unwrap() - 2.0).abs() < 1e-12);
        // 2 sin(π/24)
        assert!((adj - 0.261_052_384_440_103).abs() < 1e-12);
        assert_eq!(cyclic_distance(5, 5, 24).unwrap(), 0.0);
    }

    #[test]
    fn ordinal_discontinuity_contrast() {
        assert_eq!(encode_ordinal(0), 0.0);
        assert_eq!(encode_ordinal(23), 23.0);
        assert_eq!((encode_ordinal(23) - encode_ordinal(0)).abs(), 23.0);
        let wrap = cyclic_distance(23, 0, 24).unwrap();
        let adj = cyclic_distance(10, 11, 24).unwrap();
        assert!((wrap - adj).abs() < 1e-12);
    }

    #[test]
    fn onehot_examples() {
        assert_eq!(encode_onehot(0, 7).unwrap(), vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(encode_onehot(6, 7).unwrap(), vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        for t in 0..7 {
            assert_eq!(encode_onehot(t, 7).unwrap().iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn expand_hour_sinusoidal() {
        let ts = [at_hour(0), at_hour(6), at_hour(12)];
        let block = expand_temporal(&ts, &[CyclicFeature::hour()], EncodingStrategy::Sinusoidal).unwrap();
        assert_eq!(block.names, vec!["hour_sin", "hour_cos"]);
        let expect = [[0.0, 1.0, 0.0], [1.0, 0.0, -1.0]];
        for (col, exp) in block.columns.iter().zip(expect) {
            for (a, b) in col.iter().zip(exp) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn expand_day_of_week_ordinal() {
        let ts: Vec<_> = (0..7)
            .map(|d| {
                NaiveDate::from_ymd_opt(2023, 3, 6 + d)
                    .unwrap()
                    .and_hms_opt(9, 0, 0)
                    .unwrap()
            })
            .collect();
        let block = expand_temporal(&ts, &[CyclicFeature::day_of_week()], EncodingStrategy::Ordinal).unwrap();
        assert_eq!(block.names, vec!["dayofweek"]);
        assert_eq!(block.columns[0], vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn month_wraparound_matches_adjacent_months() {
        let dec_jan = cyclic_distance(11, 0, 12).unwrap();
        let jan_feb = cyclic_distance(0, 1, 12).unwrap();
        assert!((dec_jan - jan_feb).abs() < 1e-12);
    }

    #[test]
    fn duplicate_output_columns_rejected() {
        let ts = [at_hour(1)];
        let err = expand_temporal(
            &ts,
            &[CyclicFeature::hour(), CyclicFeature::hour()],
            EncodingStrategy::Ordinal,
        )
        .unwrap_err();
        assert_eq!(err, EncodingError::DuplicateColumn("hour".into()));
        assert_eq!(
            expand_temporal(&[], &[CyclicFeature::hour()], EncodingStrategy::Ordinal),
            Err(EncodingError::EmptyInput)
        );
    }

    #[test]
    fn strategy_column_counts() {
        let ts = [at_hour(3), at_hour(4)];
        for unit in [
            CalendarUnit::Hour,
            CalendarUnit::DayOfWeek,
            CalendarUnit::Month,
            CalendarUnit::HourOfWeek,
        ] {
            let f = CyclicFeature::new(unit);
            for s in EncodingStrategy::ALL {
                let block = encode_feature(&ts, &f, s).unwrap();
                assert_eq!(block.len(), s.width(unit.period()));
                assert!(block.columns.iter().all(|c| c.len() == 2));
            }
        }
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!("one-hot".parse::<EncodingStrategy>().unwrap(), EncodingStrategy::OneHot);
        assert_eq!(
            "Sinusoidal".parse::<EncodingStrategy>().unwrap(),
            EncodingStrategy::Sinusoidal
        );
        assert!("cyclical".parse::<EncodingStrategy>().is_err());
    }

    proptest! {
        #[test]
        fn encoding_lies_on_unit_circle(period in 2u32..400, raw in 0u32..10_000) {
            let t = raw % period;
            let (s, c) = encode_sinusoidal(t, period).unwrap();
            prop_assert!((s * s + c * c - 1.0).abs() < 1e-12);
        }

        #[test]
        fn distance_matches_chord_formula(period in 2u32..400, a in 0u32..10_000, b in 0u32..10_000) {
            let (t1, t2) = (a % period, b % period);
            let d = cyclic_distance(t1, t2, period).unwrap();
            let chord = 2.0 * (PI * (t1 as f64 - t2 as f64) / period as f64).sin().abs();
            prop_assert!((d - chord).abs() < 1e-12);
            prop_assert_eq!(d, cyclic_distance(t2, t1, period).unwrap());
            prop_assert_eq!(d == 0.0, t1 == t2);
        }

        #[test]
        fn sinusoidal_is_injective_on_a_period(period in 2u32..200) {
            let pts: Vec<_> = (0..period).map(|t| encode_sinusoidal(t, period).unwrap()).collect();
            for i in 0..pts.len() {
                for j in (i + 1)..pts.len() {
                    let d = (pts[i].0 - pts[j].0).hypot(pts[i].1 - pts[j].1);
                    prop_assert!(d > 1e-9);
                }
            }
        }
    }
}
