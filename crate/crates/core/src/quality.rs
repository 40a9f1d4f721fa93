//! Point-of-interconnection power quality: voltage change, THD, TDD,
//! flicker severity and standards compliance.
//!
//! Flicker levels are derived from RMS voltage data with a percentile of
//! relative deviation approximation, not the full lamp-eye-brain filter
//! chain; results are an approximate `Pst`.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{AlignedSeries, IngestError};

/// Highest harmonic order considered.
pub const MAX_HARMONIC_ORDER: u32 = 50;

/// Pst weights for the 0.1, 1, 3, 10 and 50 % levels.
pub const PST_WEIGHTS: [f64; 5] = [0.0314, 0.0525, 0.0657, 0.28, 0.08];

/// Exceedance percentages matching [`PST_WEIGHTS`].
pub const PST_PERCENTILES: [f64; 5] = [0.1, 1.0, 3.0, 10.0, 50.0];

/// Number of short-term values combined into one long-term value.
pub const PLT_WINDOWS: usize = 12;

#[derive(Debug, Error)]
pub enum QualityError {
    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),
    #[error("TDD needs a current spectrum")]
    WrongKind,
    #[error("Plt needs exactly {PLT_WINDOWS} Pst values, got {0}")]
    Arity(usize),
    #[error("invalid flicker input: {0}")]
    InvalidFlicker(String),
    #[error("window starting {0} has fewer than 2 present samples")]
    EmptyWindow(DateTime<Utc>),
    #[error("invalid context: {0}")]
    InvalidContext(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumKind {
    Voltage,
    Current,
}

/// Per-order RMS magnitudes. Orders outside 2..=50 are rejected; absent
/// orders count as zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicSpectrum {
    pub kind: SpectrumKind,
    pub fundamental_rms: f64,
    pub harmonics: BTreeMap<u32, f64>,
}

impl HarmonicSpectrum {
    pub fn new(
        kind: SpectrumKind,
        fundamental_rms: f64,
        harmonics: impl IntoIterator<Item = (u32, f64)>,
    ) -> Result<Self, QualityError> {
        let s = Self {
            kind,
            fundamental_rms,
            harmonics: harmonics.into_iter().collect(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), QualityError> {
        if !(self.fundamental_rms.is_finite() && self.fundamental_rms > 0.0) {
            return Err(QualityError::InvalidSpectrum(format!(
                "fundamental must be positive, got {}",
                self.fundamental_rms
            )));
        }
        for (&n, &m) in &self.harmonics {
            if !(2..=MAX_HARMONIC_ORDER).contains(&n) {
                return Err(QualityError::InvalidSpectrum(format!(
                    "order {n} outside 2..={MAX_HARMONIC_ORDER}"
                )));
            }
            if !(m.is_finite() && m >= 0.0) {
                return Err(QualityError::InvalidSpectrum(format!("order {n} magnitude {m}")));
            }
        }
        Ok(())
    }

    /// Root-sum-square of the harmonic magnitudes.
    pub fn harmonic_rss(&self) -> f64 {
        self.harmonics.values().map(|m| m * m).sum::<f64>().sqrt()
    }
}

/// Electrical context at the point of interconnection. Powers in kW/kVAr,
/// impedances in Ω, voltage in V.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoiContext {
    pub r: f64,
    pub x: f64,
    pub v_base: f64,
    pub p_l: f64,
    pub p_pv: f64,
    pub q_l: f64,
    pub q_pv: f64,
    pub max_demand_current: f64,
}

impl PoiContext {
    pub fn validate(&self) -> Result<(), QualityError> {
        if !(self.v_base > 0.0) {
            return Err(QualityError::InvalidContext("v_base must be positive".into()));
        }
        if !(self.max_demand_current > 0.0) {
            return Err(QualityError::InvalidContext(
                "max_demand_current must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Voltage change at the POI, V. Powers are converted from kW/kVAr to W/var.
pub fn voltage_change(ctx: &PoiContext) -> f64 {
    1000.0 * (ctx.r * (ctx.p_l - ctx.p_pv) + ctx.x * (ctx.q_l - ctx.q_pv)) / ctx.v_base
}

/// Total harmonic distortion, %.
pub fn thd(s: &HarmonicSpectrum) -> f64 {
    100.0 * s.harmonic_rss() / s.fundamental_rms
}

/// Total demand distortion, %: harmonic current over maximum demand current.
pub fn tdd(s: &HarmonicSpectrum, ctx: &PoiContext) -> Result<f64, QualityError> {
    if s.kind != SpectrumKind::Current {
        return Err(QualityError::WrongKind);
    }
    tdd_from_rss(s.harmonic_rss(), ctx.max_demand_current)
}

pub fn tdd_from_rss(harmonic_rss: f64, max_demand_current: f64) -> Result<f64, QualityError> {
    if !(max_demand_current > 0.0) {
        return Err(QualityError::InvalidContext(
            "max_demand_current must be positive".into(),
        ));
    }
    Ok(100.0 * harmonic_rss / max_demand_current)
}

/// Flicker perception levels exceeded 0.1, 1, 3, 10 and 50 % of the time,
/// as ratios of voltage deviation to base voltage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlickerLevels {
    pub p01: f64,
    pub p1: f64,
    pub p3: f64,
    pub p10: f64,
    pub p50: f64,
}

impl FlickerLevels {
    pub fn as_array(&self) -> [f64; 5] {
        [self.p01, self.p1, self.p3, self.p10, self.p50]
    }

    pub fn from_array(a: [f64; 5]) -> Result<Self, QualityError> {
        if a.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(QualityError::InvalidFlicker(format!(
                "levels must be finite and >= 0: {a:?}"
            )));
        }
        Ok(Self {
            p01: a[0],
            p1: a[1],
            p3: a[2],
            p10: a[3],
            p50: a[4],
        })
    }
}

/// Short-term flicker severity.
pub fn pst(levels: &FlickerLevels) -> f64 {
    PST_WEIGHTS
        .iter()
        .zip(levels.as_array())
        .map(|(w, p)| w * p)
        .sum::<f64>()
        .sqrt()
}

/// Long-term flicker severity: cube root of the mean cube of twelve Pst values.
pub fn plt(psts: &[f64]) -> Result<f64, QualityError> {
    if psts.len() != PLT_WINDOWS {
        return Err(QualityError::Arity(psts.len()));
    }
    if psts.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(QualityError::InvalidFlicker(
            "Pst values must be finite and >= 0".into(),
        ));
    }
    let mean_cube = psts.iter().map(|p| p.powi(3)).sum::<f64>() / PLT_WINDOWS as f64;
    Ok(mean_cube.cbrt())
}

/// Plt for each complete block of twelve consecutive Pst values.
pub fn plt_blocks(psts: &[f64]) -> Result<Vec<f64>, QualityError> {
    psts.chunks_exact(PLT_WINDOWS).map(plt).collect()
}

/// Value exceeded by at most `pct` percent of the samples: the smallest
/// sample `c` with `#{x > c} <= n * pct / 100`.
pub fn exceedance_level(samples: &[f64], pct: f64) -> f64 {
    let mut desc = samples.to_vec();
    desc.sort_by(|a, b| b.total_cmp(a));
    let k = ((desc.len() as f64 * pct / 100.0).floor() as usize).min(desc.len() - 1);
    desc[k]
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Levels for one window of voltage samples: percentiles of
/// `|V - median| / v_base`.
pub fn flicker_levels(samples: &[f64], v_base: f64) -> Result<FlickerLevels, QualityError> {
    if samples.len() < 2 {
        return Err(QualityError::InvalidFlicker("need at least 2 samples".into()));
    }
    if !(v_base > 0.0) {
        return Err(QualityError::InvalidContext("v_base must be positive".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = median(&sorted);
    let dev: Vec<f64> = samples.iter().map(|v| (v - m).abs() / v_base).collect();
    FlickerLevels::from_array(PST_PERCENTILES.map(|p| exceedance_level(&dev, p)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowFlicker {
    pub start: DateTime<Utc>,
    pub levels: FlickerLevels,
    /// Approximate Pst from the levels above.
    pub pst: f64,
}

/// Splits `v` into consecutive windows of `window_s` seconds and extracts
/// flicker levels per window.
pub fn flicker_levels_from_voltage(
    v: &AlignedSeries,
    v_base: f64,
    window_s: u32,
) -> Result<Vec<WindowFlicker>, QualityError> {
    if window_s == 0 || !window_s.is_multiple_of(v.resolution_s()) {
        return Err(QualityError::InvalidFlicker(format!(
            "window {window_s} s must be a positive multiple of {} s",
            v.resolution_s()
        )));
    }
    let per = (window_s / v.resolution_s()) as usize;
    if v.len() < per {
        return Err(QualityError::EmptyWindow(v.start()));
    }
    v.values()
        .chunks_exact(per)
        .enumerate()
        .map(|(k, chunk)| {
            let start = v.timestamp(k * per);
            let present: Vec<f64> = chunk.iter().flatten().copied().collect();
            if present.len() < 2 {
                return Err(QualityError::EmptyWindow(start));
            }
            let levels = flicker_levels(&present, v_base)?;
            Ok(WindowFlicker {
                start,
                pst: pst(&levels),
                levels,
            })
        })
        .collect()
}

/// Largest mean of the present samples over any full `window_s` block,
/// used as the maximum demand load current.
pub fn max_block_average(series: &AlignedSeries, window_s: u32) -> Option<f64> {
    let per = (window_s / series.resolution_s()).max(1) as usize;
    series
        .values()
        .chunks(per)
        .filter_map(|c| {
            let p: Vec<f64> = c.iter().flatten().copied().collect();
            (!p.is_empty()).then(|| p.iter().sum::<f64>() / p.len() as f64)
        })
        .reduce(f64::max)
}

/// Limits a measurement is checked against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplianceLimits {
    pub v_min: f64,
    pub v_max: f64,
    /// Voltage THD, %.
    pub vthd_max: f64,
    /// TDD, %.
    pub tdd_max: f64,
    pub pst_max: f64,
    pub plt_max: f64,
}

impl Default for ComplianceLimits {
    fn default() -> Self {
        Self {
            v_min: 265.0,
            v_max: 292.0,
            vthd_max: 5.0,
            tdd_max: 5.0,
            pst_max: 1.0,
            plt_max: 0.8,
        }
    }
}

impl ComplianceLimits {
    pub fn validate(&self) -> Result<(), QualityError> {
        let positive = [
            self.v_min,
            self.v_max,
            self.vthd_max,
            self.tdd_max,
            self.pst_max,
            self.plt_max,
        ];
        if positive.iter().any(|v| !(*v > 0.0)) || self.v_min >= self.v_max {
            return Err(QualityError::InvalidContext(format!("invalid limits {self:?}")));
        }
        Ok(())
    }
}

/// Measured metrics for one phase. Absent metrics are not checked; current
/// THD and IFL have no limit and are carried through for reporting.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseMetrics {
    pub phase: String,
    #[serde(default)]
    pub avg_rms_voltage: Option<f64>,
    #[serde(default)]
    pub voltage_thd: Option<f64>,
    #[serde(default)]
    pub current_thd: Option<f64>,
    #[serde(default)]
    pub tdd: Option<f64>,
    #[serde(default)]
    pub ifl: Option<f64>,
    #[serde(default)]
    pub pst: Option<f64>,
    #[serde(default)]
    pub plt: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    FailLow,
    FailHigh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricCheck {
    pub metric: String,
    pub phase: String,
    pub value: f64,
    pub limit_low: Option<f64>,
    pub limit_high: f64,
    pub verdict: Verdict,
    /// Distance to the nearest limit; negative when violated.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplianceReport {
    pub checks: Vec<MetricCheck>,
    pub pass: bool,
}

fn check(metric: &str, phase: &str, value: f64, low: Option<f64>, high: f64) -> MetricCheck {
    let verdict = match low {
        Some(lo) if value < lo => Verdict::FailLow,
        _ if value > high => Verdict::FailHigh,
        _ => Verdict::Pass,
    };
    let margin = match low {
        Some(lo) => (value - lo).min(high - value),
        None => high - value,
    };
    MetricCheck {
        metric: metric.to_string(),
        phase: phase.to_string(),
        value,
        limit_low: low,
        limit_high: high,
        verdict,
        margin,
    }
}

pub fn compliance(metrics: &[PhaseMetrics], limits: &ComplianceLimits) -> ComplianceReport {
    let mut checks = Vec::new();
    for m in metrics {
        let p = m.phase.as_str();
        if let Some(v) = m.avg_rms_voltage {
            checks.push(check("avg_rms_voltage", p, v, Some(limits.v_min), limits.v_max));
        }
        if let Some(v) = m.voltage_thd {
            checks.push(check("voltage_thd", p, v, None, limits.vthd_max));
        }
        if let Some(v) = m.tdd {
            checks.push(check("tdd", p, v, None, limits.tdd_max));
        }
        if let Some(v) = m.pst {
            checks.push(check("pst", p, v, None, limits.pst_max));
        }
        if let Some(v) = m.plt {
            checks.push(check("plt", p, v, None, limits.plt_max));
        }
    }
    let pass = checks.iter().all(|c| c.verdict == Verdict::Pass);
    ComplianceReport { checks, pass }
}
