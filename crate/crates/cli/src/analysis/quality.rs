use anyhow::{anyhow, Context, Result};
use chrono::{DateTime, Utc};
use serde::Serialize;
use umbra_core::ingest::{parse_table, ColumnSpec, TableSchema};
use umbra_core::quality::*;
use umbra_core::{AlignedSeries, Unit};

use crate::config::{QualityConfig, ScenarioConfig};
use crate::output::{timestamp, OutDir, PlotData, PlotSeries};

const PHASES: [&str; 3] = ["a", "b", "c"];

struct PhaseData {
    phase: &'static str,
    voltage: AlignedSeries,
    voltage_thd: AlignedSeries,
    current_thd: AlignedSeries,
    tdd: AlignedSeries,
    max_demand_current: f64,
    flicker: Vec<WindowFlicker>,
}

#[derive(Debug, Serialize)]
struct SnapshotReport {
    label: String,
    at: DateTime<Utc>,
    metrics: Vec<PhaseMetrics>,
    compliance: ComplianceReport,
}

#[derive(Debug, Serialize)]
struct Report {
    limits: ComplianceLimits,
    nominal_voltage: f64,
    /// Per phase, A.
    max_demand_current: Vec<(String, f64)>,
    snapshots: Vec<SnapshotReport>,
    /// Record-wide averages for voltage, worst 1-min values for the rest.
    worst_case: SnapshotReport,
    pass: bool,
}

/// Harmonic RSS current from THD (%) and total RMS current.
fn harmonic_rss(thd_pct: f64, i_rms: f64) -> f64 {
    let h = thd_pct / 100.0;
    h * i_rms / (1.0 + h * h).sqrt()
}

fn load(scenario: &ScenarioConfig, cfg: &QualityConfig) -> Result<Vec<PhaseData>> {
    let mut columns = Vec::new();
    for p in PHASES {
        columns.push(ColumnSpec::new(format!("v_{p}"), Unit::Volt));
        columns.push(ColumnSpec::new(format!("vthd_{p}"), Unit::Percent));
        columns.push(ColumnSpec::new(format!("ithd_{p}"), Unit::Percent));
        columns.push(ColumnSpec::new(format!("i_{p}"), Unit::Ampere));
    }
    let path = scenario.resolve(&cfg.data);
    let mut table = parse_table(&path, &TableSchema::new(cfg.resolution_s, columns))
        .with_context(|| format!("reading {}", path.display()))?;
    let mut phases = Vec::new();
    for p in PHASES {
        let mut take = |n: String| {
            table
                .take(&n)
                .ok_or_else(|| anyhow!("{}: column {n} missing", path.display()))
        };
        let voltage = take(format!("v_{p}"))?;
        let voltage_thd = take(format!("vthd_{p}"))?;
        let current_thd = take(format!("ithd_{p}"))?;
        let current = take(format!("i_{p}"))?;
        let max_demand_current =
            max_block_average(&current, cfg.demand_window_s).ok_or_else(|| anyhow!("phase {p}: no current samples"))?;
        let tdd_values = current_thd
            .values()
            .iter()
            .zip(current.values())
            .map(|(t, i)| match (t, i) {
                (Some(t), Some(i)) => tdd_from_rss(harmonic_rss(*t, *i), max_demand_current).map(Some),
                _ => Ok(None),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let tdd = AlignedSeries::new(
            format!("tdd_{p}"),
            Unit::Percent,
            current.start(),
            current.resolution_s(),
            tdd_values,
        )?;
        let flicker = flicker_levels_from_voltage(&voltage, cfg.nominal_voltage, cfg.flicker_window_s)?;
        phases.push(PhaseData {
            phase: p,
            voltage,
            voltage_thd,
            current_thd,
            tdd,
            max_demand_current,
            flicker,
        });
    }
    Ok(phases)
}

/// Plt of the twelve flicker windows around `at`, when there are twelve.
fn plt_around(flicker: &[WindowFlicker], at: DateTime<Utc>) -> Option<f64> {
    let n = flicker.len();
    if n < PLT_WINDOWS {
        return None;
    }
    let idx = flicker.iter().rposition(|w| w.start <= at).unwrap_or(0);
    let lo = idx.saturating_sub(PLT_WINDOWS / 2).min(n - PLT_WINDOWS);
    let psts: Vec<f64> = flicker[lo..lo + PLT_WINDOWS].iter().map(|w| w.pst).collect();
    plt(&psts).ok()
}

fn snapshot(d: &PhaseData, minute: &Minute, at: DateTime<Utc>) -> PhaseMetrics {
    // an instant at the record's end reports the final interval
    let at = at.min(d.voltage.timestamp(d.voltage.len().saturating_sub(1)));
    PhaseMetrics {
        phase: d.phase.to_uppercase(),
        avg_rms_voltage: minute.voltage.at(at),
        voltage_thd: minute.voltage_thd.at(at),
        current_thd: minute.current_thd.at(at),
        tdd: minute.tdd.at(at),
        ifl: None,
        // the window containing `at`, or the last complete one before it
        pst: d.flicker.iter().rev().find(|w| w.start <= at).map(|w| w.pst),
        plt: plt_around(&d.flicker, at),
    }
}

struct Minute {
    voltage: AlignedSeries,
    voltage_thd: AlignedSeries,
    current_thd: AlignedSeries,
    tdd: AlignedSeries,
}

fn max_present(s: &AlignedSeries) -> Option<f64> {
    s.present().map(|(_, x)| x).reduce(f64::max)
}

pub fn run(scenario: &ScenarioConfig, cfg: &QualityConfig, out: &OutDir) -> Result<()> {
    let phases = load(scenario, cfg)?;
    let res = if 60u32.is_multiple_of(cfg.resolution_s) {
        60
    } else {
        cfg.resolution_s
    };
    let minutes: Vec<Minute> = phases
        .iter()
        .map(|d| {
            Ok(Minute {
                voltage: d.voltage.resample(res)?,
                voltage_thd: d.voltage_thd.resample(res)?,
                current_thd: d.current_thd.resample(res)?,
                tdd: d.tdd.resample(res)?,
            })
        })
        .collect::<Result<_>>()?;

    let mut snapshots = Vec::new();
    for snap in &cfg.snapshots {
        let metrics: Vec<PhaseMetrics> = phases
            .iter()
            .zip(&minutes)
            .map(|(d, m)| snapshot(d, m, snap.at))
            .collect();
        snapshots.push(SnapshotReport {
            label: snap.label.clone(),
            at: snap.at,
            compliance: compliance(&metrics, &cfg.limits),
            metrics,
        });
    }
    let worst: Vec<PhaseMetrics> = phases
        .iter()
        .zip(&minutes)
        .map(|(d, m)| {
            let psts: Vec<f64> = d.flicker.iter().map(|w| w.pst).collect();
            PhaseMetrics {
                phase: d.phase.to_uppercase(),
                avg_rms_voltage: d.voltage.mean(),
                voltage_thd: max_present(&m.voltage_thd),
                current_thd: max_present(&m.current_thd),
                tdd: max_present(&m.tdd),
                ifl: None,
                pst: psts.iter().copied().reduce(f64::max),
                plt: plt_blocks(&psts).ok().and_then(|b| b.into_iter().reduce(f64::max)),
            }
        })
        .collect();
    let worst_case = SnapshotReport {
        label: "worst_case".into(),
        at: phases[0].voltage.start(),
        compliance: compliance(&worst, &cfg.limits),
        metrics: worst,
    };
    let pass = worst_case.compliance.pass && snapshots.iter().all(|s| s.compliance.pass);
    out.json(
        "compliance.json",
        &Report {
            limits: cfg.limits.clone(),
            nominal_voltage: cfg.nominal_voltage,
            max_demand_current: phases
                .iter()
                .map(|d| (d.phase.to_uppercase(), d.max_demand_current))
                .collect(),
            snapshots,
            worst_case,
            pass,
        },
    )?;

    let mut header = vec!["window_start", "phase"];
    header.extend(["p01", "p1", "p3", "p10", "p50", "pst"]);
    out.csv(
        "flicker.csv",
        &header,
        phases.iter().flat_map(|d| {
            d.flicker.iter().map(|w| {
                let mut row = vec![timestamp(w.start), d.phase.to_uppercase()];
                row.extend(w.levels.as_array().iter().map(|x| x.to_string()));
                row.push(w.pst.to_string());
                row
            })
        }),
    )?;

    let by_minute: Vec<&AlignedSeries> = minutes
        .iter()
        .flat_map(|m| [&m.voltage, &m.voltage_thd, &m.current_thd, &m.tdd])
        .collect();
    out.series_csv("metrics_1min.csv", &by_minute)?;

    let mut thd = Vec::new();
    for (d, m) in phases.iter().zip(&minutes) {
        thd.push(PlotSeries::from_series(format!("vthd_{}", d.phase), &m.voltage_thd));
        thd.push(PlotSeries::from_series(format!("ithd_{}", d.phase), &m.current_thd));
    }
    out.plot(&PlotData {
        name: "thd".into(),
        title: "Voltage and current THD at the point of interconnection".into(),
        x_label: "time (UTC)".into(),
        y_label: "%".into(),
        series: thd,
    })?;
    out.plot(&PlotData {
        name: "pst".into(),
        title: "Approximate short-term flicker severity".into(),
        x_label: "window start (UTC)".into(),
        y_label: "Pst".into(),
        series: phases
            .iter()
            .map(|d| PlotSeries {
                name: format!("pst_{}", d.phase),
                x: crate::output::Axis::Time(d.flicker.iter().map(|w| w.start).collect()),
                y: d.flicker.iter().map(|w| Some(w.pst)).collect(),
            })
            .collect(),
    })?;
    Ok(())
}
