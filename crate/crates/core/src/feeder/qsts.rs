//! Quasi-static time series runs and post-run checks.

use std::collections::BTreeMap;

use chrono::{DateTime, Duration, NaiveDate, Utc};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::control::{control_step, DeviceAction, DeviceKind, DeviceState, Exhausted, Violation};
use super::control::{ANSI_HIGH_PU, ANSI_LOW_PU};
use super::model::{FeederModel, Phase};
use super::powerflow::Injections;
use super::FeederError;
use crate::ingest::{AlignedSeries, TimeWindow};
use crate::perf::estimate_power;

/// Named input profiles: load multipliers, irradiance (W/m²) and module
/// temperature (°C), all on one time grid.
pub type Profiles = BTreeMap<String, AlignedSeries>;

/// Electrical and device state at one timestep after control settled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeederState {
    pub timestamp: DateTime<Utc>,
    pub voltages: Vec<[Option<Complex64>; 3]>,
    pub taps: Vec<[i32; 3]>,
    pub taps_today: Vec<[u32; 3]>,
    pub caps_on: Vec<[bool; 3]>,
    pub cap_q_kvar: Vec<[f64; 3]>,
    pub switches_today: Vec<[u32; 3]>,
    pub loss_kw: f64,
    pub loss_kvar: f64,
    pub source_kw: f64,
    pub source_kvar: f64,
    pub load_kw: f64,
    pub pv_kw: Vec<f64>,
    pub pv_kvar: Vec<f64>,
    /// Power balance residual |S_source − S_net − S_loss|, pu.
    pub mismatch_pu: f64,
    pub violations: Vec<Violation>,
    pub exhausted: Vec<Exhausted>,
}

impl FeederState {
    pub fn magnitude(&self, bus: usize, phase: Phase) -> Option<f64> {
        self.voltages[bus][phase.index()].map(|v| v.norm())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QstsRun {
    pub states: Vec<FeederState>,
    pub actions: Vec<DeviceAction>,
}

impl QstsRun {
    pub fn state_at(&self, t: DateTime<Utc>) -> Option<&FeederState> {
        self.states.iter().find(|s| s.timestamp == t)
    }

    /// Tap operations per device and phase within `window` (all when `None`).
    pub fn tap_counts(&self, model: &FeederModel, window: Option<&TimeWindow>) -> Vec<[u32; 3]> {
        let mut counts = vec![[0; 3]; model.taps.len()];
        for a in &self.actions {
            if a.kind == DeviceKind::Capacitor || window.is_some_and(|w| !w.contains(a.timestamp)) {
                continue;
            }
            if let Some(d) = model.tap_device_index(&a.device) {
                counts[d][a.phase.index()] += 1;
            }
        }
        counts
    }

    pub fn total_taps(&self, model: &FeederModel, device: &str, window: Option<&TimeWindow>) -> u32 {
        model
            .tap_device_index(device)
            .map(|d| self.tap_counts(model, window)[d].iter().sum())
            .unwrap_or(0)
    }
}

fn profile_value(profiles: &Profiles, name: &str, t: DateTime<Utc>) -> Result<f64, FeederError> {
    profiles
        .get(name)
        .ok_or_else(|| FeederError::MissingProfile {
            name: name.to_string(),
            at: None,
        })?
        .at(t)
        .ok_or_else(|| FeederError::MissingProfile {
            name: name.to_string(),
            at: Some(t),
        })
}

/// Runs the feeder through `window` at the common resolution of `profiles`.
/// Device state carries over between timesteps and daily counters reset at
/// UTC midnight.
pub fn run_qsts(model: &FeederModel, profiles: &Profiles, window: &TimeWindow) -> Result<QstsRun, FeederError> {
    let step = profiles
        .values()
        .map(|s| s.resolution_s())
        .try_fold(None::<u32>, |acc, r| match acc {
            Some(a) if a != r => Err(FeederError::Invalid("profiles use different resolutions".into())),
            _ => Ok(Some(r)),
        })?
        .unwrap_or(60);

    let mut state = DeviceState::initial(model);
    let mut states = Vec::new();
    let mut actions = Vec::new();
    let mut t = window.start;
    while t < window.end {
        state.roll_day(t.date_naive());
        let mut base = Injections::zero(model);
        let mut load_kw = 0.0;
        for load in &model.loads {
            let m = match &load.profile {
                Some(name) => profile_value(profiles, name, t)?,
                None => 1.0,
            };
            for p in Phase::ALL {
                let s = load.s_pu[p.index()] * m;
                base.add_pu(load.bus, p, s);
                load_kw += s.re * model.phase_kva;
            }
        }
        let mut pv_kw = Vec::with_capacity(model.pvs.len());
        for (site, spec) in model.pvs.iter().zip(&model.spec().pvs) {
            let ir = profile_value(profiles, &spec.irradiance, t)?;
            let temp = match &spec.temperature {
                Some(name) if spec.mode.needs_temperature() => profile_value(profiles, name, t)?,
                _ => crate::perf::STC_TEMPERATURE,
            };
            let kw = estimate_power(&spec.system, ir.max(0.0), temp, spec.mode)
                .map_err(|e| FeederError::Invalid(e.to_string()))?;
            let per_phase = kw / site.phases.len() as f64 / model.phase_kva;
            for p in site.phases.iter() {
                base.add_pu(site.bus, p, Complex64::new(-per_phase, 0.0));
            }
            pv_kw.push(kw);
        }

        let outcome = control_step(model, &mut state, &base, t)?;
        let sol = outcome.solution;
        let net = state.injections(model, &base).total();
        states.push(FeederState {
            timestamp: t,
            voltages: sol.voltages.clone(),
            taps: state.taps.clone(),
            taps_today: state.taps_today.clone(),
            caps_on: state.caps_on.clone(),
            cap_q_kvar: state.cap_q_kvar(model),
            switches_today: state.switches_today.clone(),
            loss_kw: sol.loss_kw(model),
            loss_kvar: sol.loss_kvar(model),
            source_kw: sol.source_power.re * model.phase_kva,
            source_kvar: sol.source_power.im * model.phase_kva,
            load_kw,
            pv_kvar: vec![0.0; pv_kw.len()],
            pv_kw,
            mismatch_pu: (sol.source_power - net - sol.losses).norm(),
            violations: outcome.violations,
            exhausted: outcome.exhausted,
        });
        actions.extend(outcome.actions);
        t += Duration::seconds(step as i64);
    }
    Ok(QstsRun { states, actions })
}

/// Outcome of checking a run against the device and voltage constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub timesteps: usize,
    pub tap_bounds: bool,
    pub tap_budget: bool,
    pub switch_budget: bool,
    pub cap_injection: bool,
    pub voltage_or_flagged: bool,
    pub power_balance: bool,
    pub failures: Vec<String>,
}

impl AuditReport {
    pub fn pass(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Recomputes every constraint from the recorded states and action log.
pub fn audit(model: &FeederModel, run: &QstsRun) -> AuditReport {
    let mut failures = Vec::new();
    let mut tap_bounds = true;
    let mut cap_injection = true;
    let mut voltage_or_flagged = true;
    let mut power_balance = true;
    for s in &run.states {
        for (d, dev) in model.taps.iter().enumerate() {
            for p in dev.phases.iter() {
                let tap = s.taps[d][p.index()];
                if !(dev.settings.tap_low..=dev.settings.tap_high).contains(&tap) {
                    tap_bounds = false;
                    failures.push(format!("{} {}: tap {tap} out of range at {}", dev.id, p, s.timestamp));
                }
            }
        }
        for (c, cap) in model.capacitors.iter().enumerate() {
            for p in Phase::ALL {
                let q = s.cap_q_kvar[c][p.index()];
                if q.abs() > cap.q_max_kvar + 1e-9 {
                    cap_injection = false;
                    failures.push(format!("{} {}: {q} kVAr above rating at {}", cap.id, p, s.timestamp));
                }
            }
        }
        for &b in &model.order {
            for p in model.bus_phases[b].iter() {
                let Some(v) = s.magnitude(b, p) else { continue };
                let flagged = s.violations.iter().any(|x| x.phase == p && x.bus == model.bus_ids[b]);
                if !(ANSI_LOW_PU..=ANSI_HIGH_PU).contains(&v) && !flagged {
                    voltage_or_flagged = false;
                    failures.push(format!(
                        "{} {}: {v:.4} pu unflagged at {}",
                        model.bus_ids[b], p, s.timestamp
                    ));
                }
            }
        }
        if s.mismatch_pu > 1e-6 {
            power_balance = false;
            failures.push(format!(
                "power balance residual {} pu at {}",
                s.mismatch_pu, s.timestamp
            ));
        }
    }

    let mut daily: BTreeMap<(NaiveDate, &str, Phase), u32> = BTreeMap::new();
    for a in &run.actions {
        *daily
            .entry((a.timestamp.date_naive(), a.device.as_str(), a.phase))
            .or_default() += 1;
    }
    let mut tap_budget = true;
    let mut switch_budget = true;
    for ((day, device, phase), n) in daily {
        if let Some(d) = model.tap_device_index(device) {
            if n > model.taps[d].settings.max_daily_taps {
                tap_budget = false;
                failures.push(format!("{device} {phase}: {n} taps on {day}"));
            }
        } else if let Some(c) = model.capacitors.iter().find(|c| c.id == device) {
            if n > c.max_daily_switching {
                switch_budget = false;
                failures.push(format!("{device} {phase}: {n} switchings on {day}"));
            }
        }
    }
    AuditReport {
        timesteps: run.states.len(),
        tap_bounds,
        tap_budget,
        switch_budget,
        cap_injection,
        voltage_or_flagged,
        power_balance,
        failures,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub bus: String,
    pub distance_km: f64,
    pub phase: Phase,
    pub v_pu: f64,
}

/// Bus voltage magnitudes ordered by distance from the substation.
pub fn voltage_profile(model: &FeederModel, state: &FeederState) -> Vec<ProfilePoint> {
    let mut points: Vec<ProfilePoint> = (0..model.bus_count())
        .flat_map(|b| {
            Phase::ALL.into_iter().filter_map(move |p| {
                Some(ProfilePoint {
                    bus: model.bus_ids[b].clone(),
                    distance_km: model.distance_km[b],
                    phase: p,
                    v_pu: state.magnitude(b, p)?,
                })
            })
        })
        .collect();
    points.sort_by(|a, b| {
        a.distance_km
            .total_cmp(&b.distance_km)
            .then_with(|| a.bus.cmp(&b.bus))
            .then(a.phase.cmp(&b.phase))
    });
    points
}

/// PV nameplate as a percentage of peak load.
pub fn penetration_level(model: &FeederModel) -> Result<f64, FeederError> {
    let load: f64 = model.spec().loads.iter().flat_map(|l| l.p_kw).sum();
    if !(load > 0.0) {
        return Err(FeederError::Invalid("total load must be positive".into()));
    }
    let pv: f64 = model.spec().pvs.iter().map(|p| p.system.p_dc).sum();
    Ok(100.0 * pv / load)
}
