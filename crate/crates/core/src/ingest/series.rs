use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use super::IngestError;

/// Physical unit attached to a channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    Kilowatt,
    WattPerSquareMeter,
    Celsius,
    Volt,
    Ampere,
    Percent,
    Count,
    Dimensionless,
}

impl Unit {
    pub fn symbol(self) -> &'static str {
        match self {
            Unit::Kilowatt => "kW",
            Unit::WattPerSquareMeter => "W/m2",
            Unit::Celsius => "degC",
            Unit::Volt => "V",
            Unit::Ampere => "A",
            Unit::Percent => "%",
            Unit::Count => "count",
            Unit::Dimensionless => "-",
        }
    }
}

/// Half-open time interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
}

impl TimeWindow {
    pub fn new(start: DateTime<Utc>, end: DateTime<Utc>) -> Result<Self, IngestError> {
        if start >= end {
            return Err(IngestError::InvalidWindow { start, end });
        }
        Ok(Self { start, end })
    }

    pub fn contains(&self, t: DateTime<Utc>) -> bool {
        t >= self.start && t < self.end
    }
}

/// A channel sampled on a uniform grid; `None` marks a missing sample.
///
/// Values are never imputed. Consumers decide how to treat gaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SeriesRepr")]
pub struct AlignedSeries {
    name: String,
    unit: Unit,
    start: DateTime<Utc>,
    resolution_s: u32,
    values: Vec<Option<f64>>,
}

#[derive(Deserialize)]
struct SeriesRepr {
    name: String,
    unit: Unit,
    start: DateTime<Utc>,
    resolution_s: u32,
    values: Vec<Option<f64>>,
}

impl TryFrom<SeriesRepr> for AlignedSeries {
    type Error = IngestError;

    fn try_from(r: SeriesRepr) -> Result<Self, Self::Error> {
        AlignedSeries::new(r.name, r.unit, r.start, r.resolution_s, r.values)
    }
}

impl AlignedSeries {
    pub fn new(
        name: impl Into<String>,
        unit: Unit,
        start: DateTime<Utc>,
        resolution_s: u32,
        values: Vec<Option<f64>>,
    ) -> Result<Self, IngestError> {
        let name = name.into();
        if resolution_s == 0 {
            return Err(IngestError::InvalidSeries(format!(
                "{name}: resolution must be positive"
            )));
        }
        if let Some(i) = values.iter().position(|v| matches!(v, Some(x) if !x.is_finite())) {
            return Err(IngestError::InvalidSeries(format!(
                "{name}: non-finite value at index {i}"
            )));
        }
        Ok(Self {
            name,
            unit,
            start,
            resolution_s,
            values,
        })
    }

    /// Fully-present series from plain values.
    pub fn from_values(
        name: impl Into<String>,
        unit: Unit,
        start: DateTime<Utc>,
        resolution_s: u32,
        values: impl IntoIterator<Item = f64>,
    ) -> Result<Self, IngestError> {
        Self::new(name, unit, start, resolution_s, values.into_iter().map(Some).collect())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn start(&self) -> DateTime<Utc> {
        self.start
    }

    pub fn resolution_s(&self) -> u32 {
        self.resolution_s
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Exclusive end of the covered span.
    pub fn end(&self) -> DateTime<Utc> {
        self.timestamp(self.values.len())
    }

    pub fn timestamp(&self, index: usize) -> DateTime<Utc> {
        self.start + Duration::seconds(self.resolution_s as i64 * index as i64)
    }

    /// Index of the sample whose interval contains `t`.
    pub fn index_of(&self, t: DateTime<Utc>) -> Option<usize> {
        if t < self.start {
            return None;
        }
        let idx = (t - self.start).num_seconds() / self.resolution_s as i64;
        let idx = usize::try_from(idx).ok()?;
        (idx < self.values.len()).then_some(idx)
    }

    pub fn get(&self, index: usize) -> Option<f64> {
        self.values.get(index).copied().flatten()
    }

    pub fn at(&self, t: DateTime<Utc>) -> Option<f64> {
        self.index_of(t).and_then(|i| self.get(i))
    }

    pub fn present(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values.iter().enumerate().filter_map(|(i, v)| v.map(|x| (i, x)))
    }

    pub fn present_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    pub fn mean(&self) -> Option<f64> {
        let (sum, n) = self.present().fold((0.0, 0usize), |(s, n), (_, x)| (s + x, n + 1));
        (n > 0).then(|| sum / n as f64)
    }

    pub fn same_grid(&self, other: &AlignedSeries) -> bool {
        self.start == other.start && self.resolution_s == other.resolution_s && self.values.len() == other.values.len()
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Applies `f` to every present value, keeping gaps.
    pub fn map(&self, name: impl Into<String>, unit: Unit, f: impl Fn(f64) -> f64) -> Result<Self, IngestError> {
        Self::new(
            name,
            unit,
            self.start,
            self.resolution_s,
            self.values.iter().map(|v| v.map(&f)).collect(),
        )
    }

    /// Sub-series covering the samples whose start lies in `window`.
    pub fn slice(&self, window: &TimeWindow) -> Result<Self, IngestError> {
        let first = (0..self.len()).find(|&i| window.contains(self.timestamp(i)));
        let Some(first) = first else {
            return Err(IngestError::EmptyOverlap);
        };
        let last = (first..self.len())
            .take_while(|&i| window.contains(self.timestamp(i)))
            .last()
            .unwrap_or(first);
        Self::new(
            self.name.clone(),
            self.unit,
            self.timestamp(first),
            self.resolution_s,
            self.values[first..=last].to_vec(),
        )
    }

    /// Averages onto a coarser grid anchored at the series start. The last
    /// bin may be partial.
    pub fn resample(&self, resolution_s: u32) -> Result<Self, IngestError> {
        if resolution_s == 0 || !resolution_s.is_multiple_of(self.resolution_s) {
            return Err(IngestError::GridMismatch(format!(
                "resolution {resolution_s} s is not a multiple of {} s",
                self.resolution_s
            )));
        }
        let per = (resolution_s / self.resolution_s) as usize;
        self.rebin(self.start, resolution_s, self.len().div_ceil(per))
    }

    /// Re-bins onto a coarser grid anchored at `anchor`, averaging the present
    /// samples of each bin. Bins without any present sample stay missing.
    pub(crate) fn rebin(&self, anchor: DateTime<Utc>, resolution_s: u32, bins: usize) -> Result<Self, IngestError> {
        let mut sums = vec![(0.0f64, 0usize); bins];
        for (i, x) in self.present() {
            let t = self.timestamp(i);
            if t < anchor {
                continue;
            }
            let k = ((t - anchor).num_seconds() / resolution_s as i64) as usize;
            if k < bins {
                sums[k].0 += x;
                sums[k].1 += 1;
            }
        }
        Self::new(
            self.name.clone(),
            self.unit,
            anchor,
            resolution_s,
            sums.into_iter().map(|(s, n)| (n > 0).then(|| s / n as f64)).collect(),
        )
    }
}

pub fn fahrenheit_to_celsius(f: f64) -> f64 {
    (f - 32.0) * 5.0 / 9.0
}
