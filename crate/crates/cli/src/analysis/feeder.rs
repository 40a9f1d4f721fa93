use anyhow::{Context, Result};
use chrono::{DateTime, Utc};
use serde::Serialize;
use umbra_core::feeder::*;
use umbra_core::ingest::{parse_table, ColumnSpec, TableSchema, TimeWindow};
use umbra_core::Unit;

use crate::config::{FeederConfig, ScenarioConfig};
use crate::output::{cell, timestamp, Axis, OutDir, PlotData, PlotSeries};

#[derive(Debug, Serialize)]
struct TapCount {
    device: String,
    kind: TapKind,
    phase: Phase,
    ramp: u32,
    total: u32,
}

#[derive(Debug, Serialize)]
struct SnapshotSummary {
    label: String,
    at: DateTime<Utc>,
    load_kw: f64,
    pv_kw: f64,
    loss_kw: f64,
    loss_kvar: f64,
    v_min_pu: f64,
    v_max_pu: f64,
}

#[derive(Debug, Serialize)]
struct Summary {
    feeder: String,
    penetration_pct: Option<f64>,
    window: TimeWindow,
    ramp_window: TimeWindow,
    timesteps: usize,
    /// Regulator with the most ramp-window taps.
    busiest_regulator: Option<String>,
    tap_counts: Vec<TapCount>,
    capacitor_switchings: Vec<(String, u32)>,
    violations: usize,
    exhausted: usize,
    max_mismatch_pu: f64,
    snapshots: Vec<SnapshotSummary>,
    audit: AuditReport,
}

#[derive(Debug, Serialize)]
struct ProfileSnapshot {
    label: String,
    at: DateTime<Utc>,
    points: Vec<ProfilePoint>,
}

/// Profile columns named by the model, with units by role.
fn profile_columns(model: &FeederModel) -> Vec<ColumnSpec> {
    let spec = model.spec();
    let mut cols: Vec<ColumnSpec> = Vec::new();
    let mut add = |name: &str, unit: Unit| {
        if !cols.iter().any(|c| c.column == name) {
            cols.push(ColumnSpec::new(name, unit));
        }
    };
    for l in &spec.loads {
        if let Some(p) = &l.profile {
            add(p, Unit::Dimensionless);
        }
    }
    for pv in &spec.pvs {
        add(&pv.irradiance, Unit::WattPerSquareMeter);
        if let Some(t) = &pv.temperature {
            add(t, Unit::Celsius);
        }
    }
    cols
}

fn extremes(state: &FeederState) -> (f64, f64) {
    let mags = state.voltages.iter().flatten().flatten().map(|v| v.norm());
    mags.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

pub fn run(scenario: &ScenarioConfig, cfg: &FeederConfig, out: &OutDir) -> Result<()> {
    let model_path = scenario.resolve(&cfg.model);
    let model = load_feeder(&model_path).with_context(|| format!("loading {}", model_path.display()))?;
    let profile_path = scenario.resolve(&cfg.profiles);
    let table = parse_table(
        &profile_path,
        &TableSchema::new(cfg.resolution_s, profile_columns(&model)),
    )
    .with_context(|| format!("reading {}", profile_path.display()))?;
    let profiles: Profiles = table.series.into_iter().map(|s| (s.name().to_string(), s)).collect();

    let window = cfg.window.window();
    let run = run_qsts(&model, &profiles, &window)?;
    let report = audit(&model, &run);
    if !report.pass() {
        log::warn!("feeder audit: {} failures", report.failures.len());
    }
    let ramp = cfg.ramp_window.map(|w| w.window()).unwrap_or(window);

    let ids = model.tap_device_ids();
    let ramp_counts = run.tap_counts(&model, Some(&ramp));
    let all_counts = run.tap_counts(&model, None);
    let mut tap_counts = Vec::new();
    for (d, id) in ids.iter().enumerate() {
        for p in model.tap_phases(d).iter() {
            tap_counts.push(TapCount {
                device: id.to_string(),
                kind: model.tap_kind(d),
                phase: p,
                ramp: ramp_counts[d][p.index()],
                total: all_counts[d][p.index()],
            });
        }
    }
    let busiest_regulator = ids
        .iter()
        .enumerate()
        .filter(|(d, _)| model.tap_kind(*d) == TapKind::Regulator)
        .map(|(d, id)| (ramp_counts[d].iter().sum::<u32>(), *id))
        .filter(|(n, _)| *n > 0)
        .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(a.1)))
        .map(|(_, id)| id.to_string());
    let capacitor_switchings = model
        .capacitor_ids()
        .into_iter()
        .map(|c| {
            let n = run.actions.iter().filter(|a| a.device == c).count() as u32;
            (c.to_string(), n)
        })
        .collect();

    let mut snapshots = Vec::new();
    let mut profiles_out = Vec::new();
    for snap in &cfg.snapshots {
        let Some(state) = run.state_at(snap.at) else {
            log::warn!("snapshot {} at {} is not a simulated timestep", snap.label, snap.at);
            continue;
        };
        let (v_min_pu, v_max_pu) = extremes(state);
        snapshots.push(SnapshotSummary {
            label: snap.label.clone(),
            at: snap.at,
            load_kw: state.load_kw,
            pv_kw: state.pv_kw.iter().sum(),
            loss_kw: state.loss_kw,
            loss_kvar: state.loss_kvar,
            v_min_pu,
            v_max_pu,
        });
        profiles_out.push(ProfileSnapshot {
            label: snap.label.clone(),
            at: snap.at,
            points: voltage_profile(&model, state),
        });
    }

    out.json(
        "summary.json",
        &Summary {
            feeder: model.spec().name.clone(),
            penetration_pct: penetration_level(&model).ok(),
            window,
            ramp_window: ramp,
            timesteps: run.states.len(),
            busiest_regulator,
            tap_counts,
            capacitor_switchings,
            violations: run.states.iter().map(|s| s.violations.len()).sum(),
            exhausted: run.states.iter().map(|s| s.exhausted.len()).sum(),
            max_mismatch_pu: run.states.iter().map(|s| s.mismatch_pu).fold(0.0, f64::max),
            snapshots,
            audit: report,
        },
    )?;
    out.json("voltage_profile.json", &profiles_out)?;
    write_tables(&model, &run, out)?;
    write_plots(&model, &run, &profiles_out, out)
}

fn write_tables(model: &FeederModel, run: &QstsRun, out: &OutDir) -> Result<()> {
    let ids = model.tap_device_ids();
    let caps = model.capacitor_ids();
    let mut header: Vec<String> = [
        "timestamp",
        "source_kw",
        "source_kvar",
        "load_kw",
        "pv_kw",
        "loss_kw",
        "loss_kvar",
        "mismatch_pu",
        "v_min_pu",
        "v_max_pu",
        "violations",
        "exhausted",
    ]
    .map(String::from)
    .to_vec();
    for (d, id) in ids.iter().enumerate() {
        header.extend(model.tap_phases(d).iter().map(|p| format!("tap_{id}_{p}")));
    }
    for c in &caps {
        header.extend(Phase::ALL.iter().map(|p| format!("kvar_{c}_{p}")));
    }
    let rows = run.states.iter().map(|s| {
        let (lo, hi) = extremes(s);
        let mut row = vec![
            timestamp(s.timestamp),
            s.source_kw.to_string(),
            s.source_kvar.to_string(),
            s.load_kw.to_string(),
            s.pv_kw.iter().sum::<f64>().to_string(),
            s.loss_kw.to_string(),
            s.loss_kvar.to_string(),
            s.mismatch_pu.to_string(),
            lo.to_string(),
            hi.to_string(),
            s.violations.len().to_string(),
            s.exhausted.len().to_string(),
        ];
        for d in 0..ids.len() {
            row.extend(model.tap_phases(d).iter().map(|p| s.taps[d][p.index()].to_string()));
        }
        for q in &s.cap_q_kvar {
            row.extend(q.iter().map(|x| x.to_string()));
        }
        row
    });
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    out.csv("states.csv", &header_refs, rows)?;

    out.csv(
        "actions.csv",
        &["timestamp", "device", "kind", "phase", "from", "to"],
        run.actions.iter().map(|a| {
            let kind = serde_json::to_value(a.kind).expect("kind serializes");
            vec![
                timestamp(a.timestamp),
                a.device.clone(),
                kind.as_str().unwrap_or_default().to_string(),
                a.phase.to_string(),
                a.from.to_string(),
                a.to.to_string(),
            ]
        }),
    )?;
    out.csv(
        "losses.csv",
        &["timestamp", "loss_kw", "loss_kvar"],
        run.states
            .iter()
            .map(|s| vec![timestamp(s.timestamp), cell(Some(s.loss_kw)), cell(Some(s.loss_kvar))]),
    )
}

fn write_plots(model: &FeederModel, run: &QstsRun, profiles: &[ProfileSnapshot], out: &OutDir) -> Result<()> {
    let times: Vec<DateTime<Utc>> = run.states.iter().map(|s| s.timestamp).collect();
    let mut taps = Vec::new();
    for (d, id) in model.tap_device_ids().into_iter().enumerate() {
        for p in model.tap_phases(d).iter() {
            taps.push(PlotSeries {
                name: format!("{id}_{p}"),
                x: Axis::Time(times.clone()),
                y: run.states.iter().map(|s| Some(s.taps[d][p.index()] as f64)).collect(),
            });
        }
    }
    out.plot(&PlotData {
        name: "tap_positions".into(),
        title: "Tap position per regulator and phase".into(),
        x_label: "time (UTC)".into(),
        y_label: "tap".into(),
        series: taps,
    })?;
    out.plot(&PlotData {
        name: "losses".into(),
        title: "Total active losses".into(),
        x_label: "time (UTC)".into(),
        y_label: "kW".into(),
        series: vec![PlotSeries {
            name: "loss_kw".into(),
            x: Axis::Time(times),
            y: run.states.iter().map(|s| Some(s.loss_kw)).collect(),
        }],
    })?;
    let mut series = Vec::new();
    for snap in profiles {
        for p in Phase::ALL {
            let pts: Vec<&ProfilePoint> = snap.points.iter().filter(|x| x.phase == p).collect();
            series.push(PlotSeries {
                name: format!("{}_{p}", snap.label),
                x: Axis::Value(pts.iter().map(|x| x.distance_km).collect()),
                y: pts.iter().map(|x| Some(x.v_pu)).collect(),
            });
        }
    }
    out.plot(&PlotData {
        name: "voltage_profile".into(),
        title: "Voltage against distance from the substation".into(),
        x_label: "distance (km)".into(),
        y_label: "pu".into(),
        series,
    })
}
