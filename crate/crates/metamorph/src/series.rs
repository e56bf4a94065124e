//! Time-series containers, windowing into training sequences, min-max
//! normalization, and the bundled synthetic generator.

use std::fmt;

use chrono::NaiveDate;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::faults::{self, FaultId};

/// A point on the shared time axis: either a plain integer index or an ISO
/// calendar date. A single table never mixes the two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Timestamp {
    Index(i64),
    Date(NaiveDate),
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Timestamp::Index(i) => write!(f, "{i}"),
            Timestamp::Date(d) => write!(f, "{d}"),
        }
    }
}

/// One named sequence of values over strictly increasing timestamps.
/// `None` marks a missing cell; present values are always finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    timestamps: Vec<Timestamp>,
    values: Vec<Option<f64>>,
}

impl TimeSeries {
    pub fn new(timestamps: Vec<Timestamp>, values: Vec<Option<f64>>) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::LengthMismatch {
                left: timestamps.len(),
                right: values.len(),
            });
        }
        for pair in timestamps.windows(2) {
            if pair[0] >= pair[1] {
                return Err(Error::Config(format!(
                    "timestamps must be strictly increasing: {} then {}",
                    pair[0], pair[1]
                )));
            }
        }
        if let Some(bad) = values.iter().flatten().find(|v| !v.is_finite()) {
            return Err(Error::Config(format!("non-finite value {bad} in series")));
        }
        Ok(TimeSeries { timestamps, values })
    }

    /// Dense series over index timestamps 0..len.
    pub fn from_values(values: Vec<f64>) -> Self {
        let timestamps = (0..values.len() as i64).map(Timestamp::Index).collect();
        TimeSeries {
            timestamps,
            values: values.into_iter().map(Some).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn timestamps(&self) -> &[Timestamp] {
        &self.timestamps
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn has_missing(&self) -> bool {
        self.values.iter().any(Option::is_none)
    }

    /// All values, erroring on any missing cell. The forecasting path only
    /// accepts dense series; missing cells are legal in correlation input.
    pub fn dense(&self) -> Result<Vec<f64>> {
        self.values
            .iter()
            .map(|v| v.ok_or(Error::MissingValues))
            .collect()
    }

    /// First `len` points of the series, timestamps preserved.
    pub fn truncated(&self, len: usize) -> TimeSeries {
        TimeSeries {
            timestamps: self.timestamps[..len.min(self.len())].to_vec(),
            values: self.values[..len.min(self.len())].to_vec(),
        }
    }

    /// Same timestamps with every value mapped through `f`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> TimeSeries {
        TimeSeries {
            timestamps: self.timestamps.clone(),
            values: self.values.iter().map(|v| v.map(&f)).collect(),
        }
    }
}

/// Named columns over one shared timestamp axis plus the name of the column
/// to forecast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    timestamps: Vec<Timestamp>,
    columns: Vec<Column>,
    target_name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub values: Vec<Option<f64>>,
}

impl FeatureTable {
    pub fn new(
        timestamps: Vec<Timestamp>,
        columns: Vec<Column>,
        target_name: impl Into<String>,
    ) -> Result<Self> {
        let target_name = target_name.into();
        for col in &columns {
            if col.values.len() != timestamps.len() {
                return Err(Error::LengthMismatch {
                    left: timestamps.len(),
                    right: col.values.len(),
                });
            }
        }
        let mut names: Vec<&str> = columns.iter().map(|c| c.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("duplicate column name in table".into()));
        }
        if !columns.iter().any(|c| c.name == target_name) {
            return Err(Error::UnknownColumn { name: target_name });
        }
        Ok(FeatureTable {
            timestamps,
            columns,
            target_name,
        })
    }

    /// Single-column table around an existing series.
    pub fn from_series(name: impl Into<String>, series: &TimeSeries) -> Self {
        let name = name.into();
        FeatureTable {
            timestamps: series.timestamps().to_vec(),
            columns: vec![Column {
                name: name.clone(),
                values: series.values().to_vec(),
            }],
            target_name: name,
        }
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn timestamps(&self) -> &[Timestamp] {
        &self.timestamps
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::UnknownColumn { name: name.into() })
    }

    /// Names of all non-target columns, in table order.
    pub fn feature_names(&self) -> Vec<&str> {
        self.columns
            .iter()
            .filter(|c| c.name != self.target_name)
            .map(|c| c.name.as_str())
            .collect()
    }

    /// The named column as a standalone series on the shared axis.
    pub fn series(&self, name: &str) -> Result<TimeSeries> {
        let col = self.column(name)?;
        Ok(TimeSeries {
            timestamps: self.timestamps.clone(),
            values: col.values.clone(),
        })
    }

    pub fn target_series(&self) -> TimeSeries {
        self.series(&self.target_name).expect("target column exists")
    }
}

/// Windowed (input, target) pairs cut from one series: window `i` covers
/// positions `[i, i+time_steps)` and its target covers
/// `[i+time_steps, i+time_steps+horizon)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceDataset {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
    pub time_steps: usize,
    pub horizon: usize,
}

impl SequenceDataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Cuts a dense series into contiguous stride-1 windows with their targets.
/// Yields exactly `len - time_steps - horizon + 1` sequences and errors when
/// the series is too short for even one.
pub fn make_sequences(series: &TimeSeries, time_steps: usize, horizon: usize) -> Result<SequenceDataset> {
    assert!(time_steps >= 1 && horizon >= 1, "window sizes must be positive");
    let values = series.dense()?;
    make_sequences_from(&values, time_steps, horizon)
}

/// Windowing over a bare value slice; `make_sequences` and the training
/// pipeline (which windows normalized values) share this code path.
pub fn make_sequences_from(values: &[f64], time_steps: usize, horizon: usize) -> Result<SequenceDataset> {
    let len = values.len();
    let stride = if faults::on(FaultId::WindowStrideTwo) { 2 } else { 1 };
    let target_start = if faults::on(FaultId::WindowTargetOverlap) {
        time_steps - 1
    } else {
        time_steps
    };

    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    let mut i = 0;
    while i + time_steps <= len && i + target_start + horizon <= len {
        inputs.push(values[i..i + time_steps].to_vec());
        targets.push(values[i + target_start..i + target_start + horizon].to_vec());
        i += stride;
    }
    if faults::on(FaultId::WindowCountOffByOne) {
        inputs.pop();
        targets.pop();
    }
    if inputs.is_empty() {
        return Err(Error::InsufficientData {
            len,
            time_steps,
            horizon,
        });
    }
    Ok(SequenceDataset {
        inputs,
        targets,
        time_steps,
        horizon,
    })
}

/// Min-max affine map fitted on training data only: `(x - min) / (max - min)`
/// forward, `range * y + min` back. Values outside the fitted range map
/// outside [0, 1] without error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    min: f64,
    max: f64,
}

impl Normalizer {
    /// Fits min/max over dense training values. A zero range is a
    /// constructor error, never a NaN factory.
    pub fn fit(values: &[f64]) -> Result<Self> {
        assert!(!values.is_empty(), "cannot fit a normalizer on no data");
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for &v in values {
            min = min.min(v);
            max = max.max(v);
        }
        let degenerate = if faults::on(FaultId::RangeGuardUsesMax) {
            max == 0.0
        } else {
            max == min
        };
        if degenerate {
            return Err(Error::ZeroRange { value: min });
        }
        Ok(Normalizer { min, max })
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn range(&self) -> f64 {
        self.max - self.min
    }

    pub fn normalize(&self, x: f64) -> f64 {
        let denom = if faults::on(FaultId::NormDividesByMin) {
            self.min
        } else {
            self.max - self.min
        };
        (x - self.min) / denom
    }

    pub fn denormalize(&self, y: f64) -> f64 {
        if faults::on(FaultId::DenormDropsMin) {
            return (self.max - self.min) * y;
        }
        let offset = if faults::on(FaultId::DenormUsesMax) {
            self.max
        } else {
            self.min
        };
        (self.max - self.min) * y + offset
    }
}

/// Shapes of the bundled synthetic generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    /// `120 + 0.08 t + 25 sin(2 pi t / 25) + eps_t`, `eps_t ~ N(0, 2)`.
    SineTrend,
    /// Constant 100.
    Constant,
    /// `50 + 0.5 t`.
    Linear,
    /// `100 + eps_t`, `eps_t ~ N(0, 10)`.
    Noise,
}

/// Deterministic synthetic series: point `t` depends only on
/// `(kind, seed, start + t)`, so a later slice continues an earlier one.
pub fn synth_series_from(kind: SynthKind, start: usize, length: usize, seed: u64) -> TimeSeries {
    let values = (start..start + length)
        .map(|t| synth_point(kind, t, seed))
        .collect::<Vec<_>>();
    let timestamps = (start as i64..(start + length) as i64)
        .map(Timestamp::Index)
        .collect();
    TimeSeries {
        timestamps,
        values: values.into_iter().map(Some).collect(),
    }
}

/// `synth_series_from` starting at index 0.
pub fn synth_series(kind: SynthKind, length: usize, seed: u64) -> TimeSeries {
    synth_series_from(kind, 0, length, seed)
}

fn synth_point(kind: SynthKind, t: usize, seed: u64) -> f64 {
    let tf = t as f64;
    match kind {
        SynthKind::Constant => 100.0,
        SynthKind::Linear => 50.0 + 0.5 * tf,
        SynthKind::Noise => 100.0 + 10.0 * unit_normal(seed, t),
        SynthKind::SineTrend => {
            120.0 + 0.08 * tf + 25.0 * (2.0 * std::f64::consts::PI * tf / 25.0).sin()
                + 2.0 * unit_normal(seed, t)
        }
    }
}

fn unit_normal(seed: u64, t: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t as u64);
    rng.sample(StandardNormal)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(values: &[f64]) -> TimeSeries {
        TimeSeries::from_values(values.to_vec())
    }

    #[test]
    fn window_count_and_geometry() {
        // L=20, t=5, h=2: 14 windows, first covers 0..4, first target 5..6.
        let s = series(&(0..20).map(f64::from).collect::<Vec<_>>());
        let ds = make_sequences(&s, 5, 2).unwrap();
        assert_eq!(ds.len(), 14);
        assert_eq!(ds.inputs[0], vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(ds.targets[0], vec![5.0, 6.0]);
        assert_eq!(ds.inputs[13], (13..18).map(f64::from).collect::<Vec<_>>());
        assert_eq!(ds.targets[13], vec![18.0, 19.0]);
    }

    #[test]
    fn single_window_at_exact_boundary() {
        // L = t + h leaves exactly one sequence.
        let s = series(&(0..12).map(f64::from).collect::<Vec<_>>());
        let ds = make_sequences(&s, 10, 2).unwrap();
        assert_eq!(ds.len(), 1);
    }

    #[test]
    fn one_short_of_boundary_errors() {
        let s = series(&(0..11).map(f64::from).collect::<Vec<_>>());
        match make_sequences(&s, 10, 2) {
            Err(Error::InsufficientData { len: 11, .. }) => {}
            other => panic!("expected InsufficientData, got {other:?}"),
        }
    }

    #[test]
    fn missing_cells_rejected_by_windowing() {
        let s = TimeSeries::new(
            vec![Timestamp::Index(0), Timestamp::Index(1), Timestamp::Index(2)],
            vec![Some(1.0), None, Some(3.0)],
        )
        .unwrap();
        assert!(matches!(make_sequences(&s, 1, 1), Err(Error::MissingValues)));
    }

    #[test]
    fn normalizer_midpoint_and_endpoints() {
        let n = Normalizer::fit(&[0.0, 5.0, 10.0]).unwrap();
        assert_eq!(n.min(), 0.0);
        assert_eq!(n.max(), 10.0);
        assert_eq!(n.normalize(5.0), 0.5);
        assert_eq!(n.normalize(10.0), 1.0);
        assert_eq!(n.denormalize(0.5), 5.0);
    }

    #[test]
    fn normalizer_zero_range_is_an_error() {
        match Normalizer::fit(&[7.0, 7.0, 7.0]) {
            Err(Error::ZeroRange { value }) => assert_eq!(value, 7.0),
            other => panic!("expected ZeroRange, got {other:?}"),
        }
    }

    #[test]
    fn out_of_range_values_map_outside_unit_interval() {
        let n = Normalizer::fit(&[0.0, 10.0]).unwrap();
        assert_eq!(n.normalize(15.0), 1.5);
        assert_eq!(n.normalize(-5.0), -0.5);
    }

    #[test]
    fn synth_is_deterministic_and_continuable() {
        let a = synth_series(SynthKind::SineTrend, 40, 9);
        let b = synth_series(SynthKind::SineTrend, 40, 9);
        assert_eq!(a, b);
        let tail = synth_series_from(SynthKind::SineTrend, 30, 10, 9);
        assert_eq!(&a.values()[30..], tail.values());

        let c = synth_series(SynthKind::Constant, 10, 0);
        assert!(c.values().iter().all(|v| *v == Some(100.0)));
        let l = synth_series(SynthKind::Linear, 5, 0).dense().unwrap();
        for w in l.windows(2) {
            assert_eq!(w[1] - w[0], 0.5);
        }
    }

    #[test]
    fn table_rejects_duplicate_names_and_unknown_target() {
        let ts = vec![Timestamp::Index(0)];
        let col = |name: &str| Column {
            name: name.into(),
            values: vec![Some(1.0)],
        };
        assert!(FeatureTable::new(ts.clone(), vec![col("a"), col("a")], "a").is_err());
        assert!(matches!(
            FeatureTable::new(ts, vec![col("a")], "b"),
            Err(Error::UnknownColumn { .. })
        ));
    }
}
