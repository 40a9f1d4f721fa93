//! PV power and energy estimation, performance ratio and the power
//! performance index (PPI).
//!
//! Expected power follows the usual nameplate scaling
//! `P = P_dc * (Ir / 1000) * X * D`, where `D` is the product of the de-rate
//! coefficients and `X` an optional module-temperature correction.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{AlignedSeries, IngestError, TimeWindow, Unit};

/// Irradiance at standard test conditions, W/m².
pub const STC_IRRADIANCE: f64 = 1000.0;
/// Cell temperature at standard test conditions, °C.
pub const STC_TEMPERATURE: f64 = 25.0;

#[derive(Debug, Error)]
pub enum PerfError {
    #[error("invalid PV system `{name}`: {reason}")]
    InvalidSpec { name: String, reason: String },
    #[error("irradiance must be non-negative, got {0}")]
    NegativeIrradiance(f64),
    #[error("energy estimation needs 60 s data, got {0} s")]
    Resolution(u32),
    #[error("performance ratio undefined: zero insolation")]
    UndefinedPr,
    #[error("PPI undefined for non-positive estimate {0} kW")]
    UndefinedPpi(f64),
    #[error("average cell temperature not configured for `{0}`")]
    MissingCellAverage(String),
    #[error("empty window: {0}")]
    EmptyWindow(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

/// Nameplate and loss coefficients of one PV plant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PvSystemSpec {
    pub name: String,
    /// Nameplate DC capacity, kW.
    pub p_dc: f64,
    pub p_dirt: f64,
    pub p_mismatch: f64,
    pub p_cable: f64,
    pub p_inverter: f64,
    /// Power temperature coefficient, %/°C (negative for silicon).
    pub temp_coeff_pct: f64,
    /// Reference cell temperature for [`CorrectionMode::ToAvgCell`], °C.
    #[serde(default)]
    pub t_cell_avg: Option<f64>,
}

impl PvSystemSpec {
    pub fn validate(&self) -> Result<(), PerfError> {
        let bad = |reason: String| PerfError::InvalidSpec {
            name: self.name.clone(),
            reason,
        };
        if !(self.p_dc.is_finite() && self.p_dc > 0.0) {
            return Err(bad(format!("p_dc must be positive, got {}", self.p_dc)));
        }
        for (label, v) in self.coefficients() {
            if !(v > 0.0 && v <= 1.0) {
                return Err(bad(format!("{label} must lie in (0, 1], got {v}")));
            }
        }
        if !self.temp_coeff_pct.is_finite() {
            return Err(bad("temp_coeff_pct must be finite".into()));
        }
        if matches!(self.t_cell_avg, Some(t) if !t.is_finite()) {
            return Err(bad("t_cell_avg must be finite".into()));
        }
        Ok(())
    }

    fn coefficients(&self) -> [(&'static str, f64); 4] {
        [
            ("p_dirt", self.p_dirt),
            ("p_mismatch", self.p_mismatch),
            ("p_cable", self.p_cable),
            ("p_inverter", self.p_inverter),
        ]
    }

    /// Fills `t_cell_avg` from the mean of a module-temperature record when
    /// it was not configured.
    pub fn with_cell_average_from(mut self, module_temperature: &AlignedSeries) -> Self {
        if self.t_cell_avg.is_none() {
            self.t_cell_avg = module_temperature.mean();
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionMode {
    #[default]
    Uncorrected,
    ToStc,
    ToAvgCell,
}

impl CorrectionMode {
    pub fn needs_temperature(self) -> bool {
        self != CorrectionMode::Uncorrected
    }
}

/// De-rate factor: the product of the four loss coefficients.
pub fn derate(spec: &PvSystemSpec) -> f64 {
    spec.p_dirt * spec.p_mismatch * spec.p_cable * spec.p_inverter
}

pub fn correction_factor(mode: CorrectionMode, t_module: f64, spec: &PvSystemSpec) -> Result<f64, PerfError> {
    let k = spec.temp_coeff_pct / 100.0;
    Ok(match mode {
        CorrectionMode::Uncorrected => 1.0,
        CorrectionMode::ToStc => 1.0 + k * (t_module - STC_TEMPERATURE),
        CorrectionMode::ToAvgCell => {
            let reference = spec
                .t_cell_avg
                .ok_or_else(|| PerfError::MissingCellAverage(spec.name.clone()))?;
            1.0 + k * (t_module - reference)
        }
    })
}

/// Expected AC power in kW.
pub fn estimate_power(spec: &PvSystemSpec, ir: f64, t_module: f64, mode: CorrectionMode) -> Result<f64, PerfError> {
    if ir < 0.0 || ir.is_nan() {
        return Err(PerfError::NegativeIrradiance(ir));
    }
    let x = correction_factor(mode, t_module, spec)?;
    Ok(spec.p_dc * (ir / STC_IRRADIANCE) * x * derate(spec))
}

fn sample_estimate(
    spec: &PvSystemSpec,
    ir: Option<f64>,
    t: Option<f64>,
    mode: CorrectionMode,
) -> Result<Option<f64>, PerfError> {
    let Some(ir) = ir else { return Ok(None) };
    match (mode.needs_temperature(), t) {
        (false, _) => estimate_power(spec, ir, STC_TEMPERATURE, mode).map(Some),
        (true, Some(t)) => estimate_power(spec, ir, t, mode).map(Some),
        (true, None) => Ok(None),
    }
}

fn check_temperature_grid(
    ir: &AlignedSeries,
    t: Option<&AlignedSeries>,
    mode: CorrectionMode,
) -> Result<(), PerfError> {
    match t {
        Some(t) if !t.same_grid(ir) => {
            Err(IngestError::GridMismatch(format!("{} and {} must share a grid", ir.name(), t.name())).into())
        }
        None if mode.needs_temperature() => {
            Err(IngestError::InvalidSeries(format!("{mode:?} needs a module temperature series")).into())
        }
        _ => Ok(()),
    }
}

/// Per-sample expected power; missing inputs give missing output.
pub fn estimate_power_series(
    spec: &PvSystemSpec,
    ir: &AlignedSeries,
    t_module: Option<&AlignedSeries>,
    mode: CorrectionMode,
    name: &str,
) -> Result<AlignedSeries, PerfError> {
    check_temperature_grid(ir, t_module, mode)?;
    let values = (0..ir.len())
        .map(|i| sample_estimate(spec, ir.get(i), t_module.and_then(|t| t.get(i)), mode))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(AlignedSeries::new(
        name,
        Unit::Kilowatt,
        ir.start(),
        ir.resolution_s(),
        values,
    )?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyEstimate {
    pub kwh: f64,
    /// Fraction of samples that contributed.
    pub coverage: f64,
}

/// Expected energy over 1-minute data. The temperature correction is applied
/// per sample, inside the sum.
pub fn estimate_energy(
    spec: &PvSystemSpec,
    ir: &AlignedSeries,
    t_module: Option<&AlignedSeries>,
    mode: CorrectionMode,
) -> Result<EnergyEstimate, PerfError> {
    if ir.resolution_s() != 60 {
        return Err(PerfError::Resolution(ir.resolution_s()));
    }
    check_temperature_grid(ir, t_module, mode)?;
    let mut kwh = 0.0;
    let mut used = 0usize;
    for i in 0..ir.len() {
        if let Some(p) = sample_estimate(spec, ir.get(i), t_module.and_then(|t| t.get(i)), mode)? {
            kwh += p / 60.0;
            used += 1;
        }
    }
    let coverage = if ir.is_empty() {
        0.0
    } else {
        used as f64 / ir.len() as f64
    };
    Ok(EnergyEstimate { kwh, coverage })
}

/// Plane insolation in Wh/m²: the irradiance sum weighted by the sample
/// duration in hours.
pub fn insolation_wh(ir: &AlignedSeries) -> f64 {
    let hours = ir.resolution_s() as f64 / 3600.0;
    ir.present().map(|(_, x)| x).sum::<f64>() * hours
}

/// Performance ratio `(kWh / P_dc) * (1000 / insolation)`.
pub fn performance_ratio(actual_kwh: f64, spec: &PvSystemSpec, ir: &AlignedSeries) -> Result<f64, PerfError> {
    let h = insolation_wh(ir);
    if h <= 0.0 {
        return Err(PerfError::UndefinedPr);
    }
    Ok(actual_kwh / spec.p_dc * (STC_IRRADIANCE / h))
}

pub fn ppi(actual_kw: f64, estimate_kw: f64) -> Result<f64, PerfError> {
    if estimate_kw > 0.0 {
        Ok(actual_kw / estimate_kw)
    } else {
        Err(PerfError::UndefinedPpi(estimate_kw))
    }
}

/// PPI per sample. Samples whose estimate is at or below `min_estimate_kw`
/// (night, deep eclipse) are left undefined rather than blowing up.
pub fn ppi_series(
    actual: &AlignedSeries,
    estimate: &AlignedSeries,
    min_estimate_kw: f64,
    name: &str,
) -> Result<AlignedSeries, PerfError> {
    if !actual.same_grid(estimate) {
        return Err(
            IngestError::GridMismatch(format!("{} and {} must share a grid", actual.name(), estimate.name())).into(),
        );
    }
    let values = actual
        .values()
        .iter()
        .zip(estimate.values())
        .map(|(a, e)| match (a, e) {
            (Some(a), Some(e)) if *e > min_estimate_kw.max(0.0) => ppi(*a, *e).ok(),
            _ => None,
        })
        .collect();
    Ok(AlignedSeries::new(
        name,
        Unit::Dimensionless,
        actual.start(),
        actual.resolution_s(),
        values,
    )?)
}

/// Drop statistics of one channel over a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelDrop {
    pub name: String,
    pub unit: Unit,
    /// First present sample of the window.
    pub pre: f64,
    pub pre_at: DateTime<Utc>,
    pub min: f64,
    pub min_at: DateTime<Utc>,
    pub max: f64,
    pub max_at: DateTime<Utc>,
    /// `pre - min`.
    pub absolute_drop: f64,
    /// `100 * (pre - min) / pre`; absent when `pre == 0`.
    pub percent_drop: Option<f64>,
    /// `100 * (max - pre) / pre`; absent when `pre == 0`.
    pub percent_rise: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EclipseSummary {
    pub window: TimeWindow,
    pub channels: Vec<ChannelDrop>,
}

impl EclipseSummary {
    pub fn channel(&self, name: &str) -> Option<&ChannelDrop> {
        self.channels.iter().find(|c| c.name == name)
    }
}

pub fn channel_drop(series: &AlignedSeries, window: &TimeWindow) -> Result<ChannelDrop, PerfError> {
    let mut samples = series
        .present()
        .map(|(i, x)| (series.timestamp(i), x))
        .filter(|(t, _)| window.contains(*t));
    let Some((pre_at, pre)) = samples.next() else {
        return Err(PerfError::EmptyWindow(series.name().to_string()));
    };
    let (mut min, mut min_at, mut max, mut max_at) = (pre, pre_at, pre, pre_at);
    for (t, x) in samples {
        if x < min {
            min = x;
            min_at = t;
        }
        if x > max {
            max = x;
            max_at = t;
        }
    }
    let pct = |delta: f64| (pre != 0.0).then(|| 100.0 * delta / pre);
    Ok(ChannelDrop {
        name: series.name().to_string(),
        unit: series.unit(),
        pre,
        pre_at,
        min,
        min_at,
        max,
        max_at,
        absolute_drop: pre - min,
        percent_drop: pct(pre - min),
        percent_rise: pct(max - pre),
    })
}

pub fn eclipse_summary(channels: &[AlignedSeries], window: TimeWindow) -> Result<EclipseSummary, PerfError> {
    let channels = channels
        .iter()
        .map(|c| channel_drop(c, &window))
        .collect::<Result<_, _>>()?;
    Ok(EclipseSummary { window, channels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Duration, TimeZone};

    fn system_a() -> PvSystemSpec {
        PvSystemSpec {
            name: "A".into(),
            p_dc: 1400.0,
            p_dirt: 0.9,
            p_mismatch: 0.97,
            p_cable: 0.99,
            p_inverter: 0.98,
            temp_coeff_pct: -0.5,
            t_cell_avg: None,
        }
    }

    fn unit_spec(p_dc: f64) -> PvSystemSpec {
        PvSystemSpec {
            name: "u".into(),
            p_dc,
            p_dirt: 1.0,
            p_mismatch: 1.0,
            p_cable: 1.0,
            p_inverter: 1.0,
            temp_coeff_pct: -0.5,
            t_cell_avg: Some(40.0),
        }
    }

    fn t0() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2017, 8, 21, 18, 0, 0).unwrap()
    }

    #[test]
    fn derate_values() {
        assert!((derate(&system_a()) - 0.846985).abs() < 1e-6);
        let mut b = system_a();
        b.p_inverter = 0.9725;
        // exact product is 0.840502575
        assert!((derate(&b) - 0.840_502_575).abs() < 1e-6);
        assert_eq!(derate(&unit_spec(1.0)), 1.0);
    }

    #[test]
    fn validation() {
        let mut s = system_a();
        s.p_cable = 1.2;
        assert!(s.validate().is_err());
        s.p_cable = 0.0;
        assert!(s.validate().is_err());
        let mut s = system_a();
        s.p_dc = 0.0;
        assert!(s.validate().is_err());
        assert!(system_a().validate().is_ok());
    }

    #[test]
    fn correction_factors() {
        let s = unit_spec(1.0);
        assert_eq!(correction_factor(CorrectionMode::ToStc, 25.0, &s).unwrap(), 1.0);
        assert!((correction_factor(CorrectionMode::ToStc, 45.0, &s).unwrap() - 0.90).abs() < 1e-12);
        assert_eq!(correction_factor(CorrectionMode::ToAvgCell, 40.0, &s).unwrap(), 1.0);
        assert_eq!(correction_factor(CorrectionMode::Uncorrected, 80.0, &s).unwrap(), 1.0);
        assert!(matches!(
            correction_factor(CorrectionMode::ToAvgCell, 40.0, &system_a()),
            Err(PerfError::MissingCellAverage(_))
        ));
    }

    #[test]
    fn power_examples() {
        let a = system_a();
        assert_eq!(estimate_power(&a, 0.0, 30.0, CorrectionMode::Uncorrected).unwrap(), 0.0);
        assert!((estimate_power(&a, 1000.0, 30.0, CorrectionMode::Uncorrected).unwrap() - 1185.78).abs() < 0.01);
        let mut b = system_a();
        b.p_dc = 355.0;
        b.p_inverter = 0.9725;
        assert!((estimate_power(&b, 500.0, 30.0, CorrectionMode::Uncorrected).unwrap() - 149.19).abs() < 0.01);
        assert!(matches!(
            estimate_power(&a, -1.0, 25.0, CorrectionMode::Uncorrected),
            Err(PerfError::NegativeIrradiance(_))
        ));
    }

    #[test]
    fn one_hour_at_nameplate() {
        let ir = AlignedSeries::from_values("ir", Unit::WattPerSquareMeter, t0(), 60, vec![1000.0; 60]).unwrap();
        let e = estimate_energy(&unit_spec(100.0), &ir, None, CorrectionMode::Uncorrected).unwrap();
        assert!((e.kwh - 100.0).abs() < 1e-9);
        assert_eq!(e.coverage, 1.0);
    }

    #[test]
    fn all_missing_energy() {
        let ir = AlignedSeries::new("ir", Unit::WattPerSquareMeter, t0(), 60, vec![None; 30]).unwrap();
        let e = estimate_energy(&unit_spec(100.0), &ir, None, CorrectionMode::Uncorrected).unwrap();
        assert_eq!(e.kwh, 0.0);
        assert_eq!(e.coverage, 0.0);
    }

    #[test]
    fn energy_requires_minute_data() {
        let ir = AlignedSeries::from_values("ir", Unit::WattPerSquareMeter, t0(), 300, vec![1.0]).unwrap();
        assert!(matches!(
            estimate_energy(&unit_spec(1.0), &ir, None, CorrectionMode::Uncorrected),
            Err(PerfError::Resolution(300))
        ));
    }

    #[test]
    fn corrected_energy_needs_temperature() {
        let ir = AlignedSeries::from_values("ir", Unit::WattPerSquareMeter, t0(), 60, vec![1.0]).unwrap();
        assert!(estimate_energy(&unit_spec(1.0), &ir, None, CorrectionMode::ToStc).is_err());
    }

    #[test]
    fn performance_ratio_ideal_system_is_one() {
        let n = 90;
        let ir = AlignedSeries::from_values("ir", Unit::WattPerSquareMeter, t0(), 60, vec![1000.0; n]).unwrap();
        let spec = unit_spec(250.0);
        let actual = spec.p_dc * n as f64 / 60.0;
        // direct formula: (kWh / P_dc) * 1000 / (sum Ir * dt_h)
        let oracle = (actual / 250.0) * (1000.0 / (1000.0 * n as f64 / 60.0));
        let pr = performance_ratio(actual, &spec, &ir).unwrap();
        assert!((pr - oracle).abs() < 1e-12);
        assert!((pr - 1.0).abs() < 1e-12);
        assert_eq!(performance_ratio(0.0, &spec, &ir).unwrap(), 0.0);
        assert!((performance_ratio(2.0 * actual, &spec, &ir).unwrap() - 2.0 * pr).abs() < 1e-12);
        let dark = AlignedSeries::from_values("ir", Unit::WattPerSquareMeter, t0(), 60, vec![0.0; 3]).unwrap();
        assert!(matches!(
            performance_ratio(1.0, &spec, &dark),
            Err(PerfError::UndefinedPr)
        ));
    }

    #[test]
    fn ppi_examples() {
        assert_eq!(ppi(5.0, 5.0).unwrap(), 1.0);
        assert!((ppi(108.2, 100.0).unwrap() - 1.082).abs() < 1e-12);
        assert_eq!(ppi(0.0, 3.0).unwrap(), 0.0);
        assert!(matches!(ppi(1.0, 0.0), Err(PerfError::UndefinedPpi(_))));
        assert!(ppi(1.0, -2.0).is_err());
    }

    #[test]
    fn ppi_series_marks_night_undefined() {
        let a = AlignedSeries::from_values("a", Unit::Kilowatt, t0(), 60, vec![1.0, 2.0, 0.0]).unwrap();
        let e = AlignedSeries::from_values("e", Unit::Kilowatt, t0(), 60, vec![1.0, 0.0, 0.0]).unwrap();
        let p = ppi_series(&a, &e, 0.0, "ppi").unwrap();
        assert_eq!(p.values(), &[Some(1.0), None, None]);
    }

    #[test]
    fn drop_table_arithmetic() {
        let w = TimeWindow::new(t0(), t0() + Duration::hours(1)).unwrap();
        let power =
            AlignedSeries::from_values("power", Unit::Kilowatt, t0(), 60, vec![711.0, 400.0, 207.6, 300.0]).unwrap();
        let d = channel_drop(&power, &w).unwrap();
        assert!((d.absolute_drop - 503.4).abs() < 1e-9);
        assert!((d.percent_drop.unwrap() - 70.8).abs() < 0.1);
        assert_eq!(d.min_at, t0() + Duration::minutes(2));

        let flat = AlignedSeries::from_values("flat", Unit::Kilowatt, t0(), 60, vec![5.0; 10]).unwrap();
        let d = channel_drop(&flat, &w).unwrap();
        assert_eq!(d.absolute_drop, 0.0);
        assert_eq!(d.percent_drop, Some(0.0));

        let irr = AlignedSeries::from_values("irr", Unit::WattPerSquareMeter, t0(), 60, vec![663.8, 193.8]).unwrap();
        let d = channel_drop(&irr, &w).unwrap();
        assert!((d.absolute_drop - 470.0).abs() < 0.1);
        assert!((d.percent_drop.unwrap() - 70.8).abs() < 0.1);
    }

    #[test]
    fn pre_value_skips_leading_gap_and_window_outside_is_error() {
        let s = AlignedSeries::new("p", Unit::Kilowatt, t0(), 60, vec![None, Some(10.0), Some(4.0)]).unwrap();
        let w = TimeWindow::new(t0(), t0() + Duration::hours(1)).unwrap();
        assert_eq!(channel_drop(&s, &w).unwrap().pre, 10.0);
        let late = TimeWindow::new(t0() + Duration::hours(2), t0() + Duration::hours(3)).unwrap();
        assert!(matches!(channel_drop(&s, &late), Err(PerfError::EmptyWindow(_))));
    }

    #[test]
    fn cell_average_default() {
        let mt = AlignedSeries::from_values("mt", Unit::Celsius, t0(), 60, vec![30.0, 40.0, 50.0]).unwrap();
        let s = system_a().with_cell_average_from(&mt);
        assert_eq!(s.t_cell_avg, Some(40.0));
        let s = unit_spec(1.0).with_cell_average_from(&mt);
        assert_eq!(s.t_cell_avg, Some(40.0));
    }
}
