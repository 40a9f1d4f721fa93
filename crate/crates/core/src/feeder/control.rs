//! Discrete voltage control: tap changers and switched capacitors.

use std::collections::BTreeMap;

use chrono::{DateTime, NaiveDate, Utc};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::model::{CapacitorControl, FeederModel, Phase, TapKind};
use super::powerflow::{solve_powerflow, Injections, PowerFlowSolution};
use super::FeederError;

/// Service voltage limits enforced at every bus, pu.
pub const ANSI_LOW_PU: f64 = 0.95;
pub const ANSI_HIGH_PU: f64 = 1.05;
/// Direction reversals allowed per device phase within one timestep.
pub const MAX_REVERSALS: u32 = 5;
const MAX_ACTIONS_PER_STEP: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceKind {
    Regulator,
    Ltc,
    Capacitor,
}

impl From<TapKind> for DeviceKind {
    fn from(k: TapKind) -> Self {
        match k {
            TapKind::Regulator => DeviceKind::Regulator,
            TapKind::Ltc => DeviceKind::Ltc,
        }
    }
}

/// One discrete operation. For capacitors `from`/`to` are 0 (off) or 1 (on).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceAction {
    pub timestamp: DateTime<Utc>,
    pub device: String,
    pub kind: DeviceKind,
    pub phase: Phase,
    pub from: i32,
    pub to: i32,
}

/// Bus phase left outside the service limits after control settled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub bus: String,
    pub phase: Phase,
    pub v_pu: f64,
}

/// Tap device whose control bus is out of band with no tap or daily budget
/// left in the needed direction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exhausted {
    pub device: String,
    pub phase: Phase,
}

/// Positions and counters of every discrete device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceState {
    pub taps: Vec<[i32; 3]>,
    pub taps_today: Vec<[u32; 3]>,
    pub taps_total: Vec<[u32; 3]>,
    pub caps_on: Vec<[bool; 3]>,
    pub switches_today: Vec<[u32; 3]>,
    pub switches_total: Vec<[u32; 3]>,
    pub day: Option<NaiveDate>,
}

impl DeviceState {
    pub fn initial(model: &FeederModel) -> Self {
        let nt = model.taps.len();
        let nc = model.capacitors.len();
        Self {
            taps: model.taps.iter().map(|t| [t.settings.initial_tap; 3]).collect(),
            taps_today: vec![[0; 3]; nt],
            taps_total: vec![[0; 3]; nt],
            caps_on: model
                .capacitors
                .iter()
                .map(|c| std::array::from_fn(|p| c.initially_on && c.phases.contains(Phase::from_index(p))))
                .collect(),
            switches_today: vec![[0; 3]; nc],
            switches_total: vec![[0; 3]; nc],
            day: None,
        }
    }

    /// Resets the daily counters when `date` starts a new day.
    pub fn roll_day(&mut self, date: NaiveDate) {
        if self.day != Some(date) {
            self.day = Some(date);
            self.taps_today.iter_mut().for_each(|c| *c = [0; 3]);
            self.switches_today.iter_mut().for_each(|c| *c = [0; 3]);
        }
    }

    /// Reactive injection of each capacitor phase, kVAr.
    pub fn cap_q_kvar(&self, model: &FeederModel) -> Vec<[f64; 3]> {
        model
            .capacitors
            .iter()
            .zip(&self.caps_on)
            .map(|(c, on)| std::array::from_fn(|p| if on[p] { c.q_max_kvar } else { 0.0 }))
            .collect()
    }

    /// `base` plus the reactive support of the energized capacitors.
    pub fn injections(&self, model: &FeederModel, base: &Injections) -> Injections {
        let mut inj = base.clone();
        for (c, on) in model.capacitors.iter().zip(&self.caps_on) {
            for p in c.phases.iter() {
                if on[p.index()] {
                    inj.add_pu(c.bus, p, Complex64::new(0.0, -c.q_pu));
                }
            }
        }
        inj
    }
}

#[derive(Debug, Clone)]
pub struct ControlOutcome {
    pub solution: PowerFlowSolution,
    pub actions: Vec<DeviceAction>,
    pub violations: Vec<Violation>,
    pub exhausted: Vec<Exhausted>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Key {
    Tap(usize, usize),
    Cap(usize, usize),
}

#[derive(Default)]
struct Guard {
    last: BTreeMap<Key, (i32, u32)>,
}

impl Guard {
    fn record(&mut self, key: Key, dir: i32, device: &str, phase: Phase) -> Result<(), FeederError> {
        let entry = self.last.entry(key).or_insert((dir, 0));
        if entry.0 != dir {
            entry.0 = dir;
            entry.1 += 1;
            if entry.1 > MAX_REVERSALS {
                return Err(FeederError::ControlOscillation {
                    device: device.to_string(),
                    phase,
                });
            }
        }
        Ok(())
    }
}

/// Settles the discrete devices for the load/generation in `base`.
///
/// One device moves per iteration and the network is re-solved after each
/// move: voltage-band capacitors first, then the regulator furthest outside
/// its band, then the nearest upstream regulator for any bus outside the
/// service limits. Bus phases that cannot be corrected are reported in
/// [`ControlOutcome::violations`].
pub fn control_step(
    model: &FeederModel,
    state: &mut DeviceState,
    base: &Injections,
    timestamp: DateTime<Utc>,
) -> Result<ControlOutcome, FeederError> {
    let mut guard = Guard::default();
    let mut actions = Vec::new();
    for _ in 0..MAX_ACTIONS_PER_STEP {
        let inj = state.injections(model, base);
        let sol = solve_powerflow(model, &state.taps, &inj)?;
        let mag = |bus: usize, p: Phase| sol.magnitude(bus, p).unwrap_or(f64::NAN);

        if let Some((c, p, on)) = capacitor_move(model, state, &mag) {
            let cap = &model.capacitors[c];
            guard.record(Key::Cap(c, p.index()), if on { 1 } else { -1 }, &cap.id, p)?;
            state.caps_on[c][p.index()] = on;
            state.switches_today[c][p.index()] += 1;
            state.switches_total[c][p.index()] += 1;
            actions.push(DeviceAction {
                timestamp,
                device: cap.id.clone(),
                kind: DeviceKind::Capacitor,
                phase: p,
                from: i32::from(!on),
                to: i32::from(on),
            });
            continue;
        }

        let mut exhausted = Vec::new();
        let mut best: Option<(usize, Phase, i32, f64)> = None;
        for (d, dev) in model.taps.iter().enumerate() {
            let (lo, hi) = dev.settings.band();
            for p in dev.phases.iter() {
                let v = mag(dev.control_bus, p);
                let (dir, excess) = if v < lo {
                    (1, lo - v)
                } else if v > hi {
                    (-1, v - hi)
                } else {
                    continue;
                };
                if can_move(model, state, d, p, dir) {
                    if best.is_none_or(|b| excess > b.3) {
                        best = Some((d, p, dir, excess));
                    }
                } else {
                    exhausted.push(Exhausted {
                        device: dev.id.clone(),
                        phase: p,
                    });
                }
            }
        }
        if let Some((d, p, dir, _)) = best {
            move_tap(model, state, &mut guard, &mut actions, d, p, dir, timestamp)?;
            continue;
        }

        let mut violations = Vec::new();
        let mut acted = false;
        'scan: for &b in &model.order {
            for p in model.bus_phases[b].iter() {
                let v = mag(b, p);
                let dir = if v < ANSI_LOW_PU {
                    1
                } else if v > ANSI_HIGH_PU {
                    -1
                } else {
                    continue;
                };
                if let Some(d) = upstream_corrector(model, state, &sol, b, p, dir) {
                    move_tap(model, state, &mut guard, &mut actions, d, p, dir, timestamp)?;
                    acted = true;
                    break 'scan;
                }
                violations.push(Violation {
                    bus: model.bus_ids[b].clone(),
                    phase: p,
                    v_pu: v,
                });
            }
        }
        if acted {
            continue;
        }
        return Ok(ControlOutcome {
            solution: sol,
            actions,
            violations,
            exhausted,
        });
    }
    Err(FeederError::ControlOscillation {
        device: "<any>".into(),
        phase: Phase::A,
    })
}

fn capacitor_move(
    model: &FeederModel,
    state: &DeviceState,
    mag: &impl Fn(usize, Phase) -> f64,
) -> Option<(usize, Phase, bool)> {
    let mut best: Option<(usize, Phase, bool, f64)> = None;
    for (c, cap) in model.capacitors.iter().enumerate() {
        let CapacitorControl::VoltageBand { on_pu, off_pu } = cap.control else {
            continue;
        };
        for p in cap.phases.iter() {
            let i = p.index();
            if state.switches_today[c][i] >= cap.max_daily_switching {
                continue;
            }
            let v = mag(cap.bus, p);
            let on = state.caps_on[c][i];
            let candidate = if !on && v < on_pu {
                Some((true, on_pu - v))
            } else if on && v > off_pu {
                Some((false, v - off_pu))
            } else {
                None
            };
            if let Some((to, excess)) = candidate {
                if best.is_none_or(|b| excess > b.3) {
                    best = Some((c, p, to, excess));
                }
            }
        }
    }
    best.map(|(c, p, to, _)| (c, p, to))
}

fn can_move(model: &FeederModel, state: &DeviceState, d: usize, p: Phase, dir: i32) -> bool {
    let s = &model.taps[d].settings;
    let next = state.taps[d][p.index()] + dir;
    (s.tap_low..=s.tap_high).contains(&next) && state.taps_today[d][p.index()] < s.max_daily_taps
}

/// Nearest tap device above `bus` able to move in `dir` without pushing its
/// own control bus out of band.
fn upstream_corrector(
    model: &FeederModel,
    state: &DeviceState,
    sol: &PowerFlowSolution,
    bus: usize,
    p: Phase,
    dir: i32,
) -> Option<usize> {
    model.path_to_source(bus).find_map(|k| {
        let d = model.branches[k].tap?;
        let dev = &model.taps[d];
        if !dev.phases.contains(p) || !can_move(model, state, d, p, dir) {
            return None;
        }
        let tap = state.taps[d][p.index()];
        let scale = dev.settings.ratio(tap + dir) / dev.settings.ratio(tap);
        let predicted = sol.magnitude(dev.control_bus, p)? * scale;
        let (lo, hi) = dev.settings.band();
        (lo..=hi).contains(&predicted).then_some(d)
    })
}

#[allow(clippy::too_many_arguments)]
fn move_tap(
    model: &FeederModel,
    state: &mut DeviceState,
    guard: &mut Guard,
    actions: &mut Vec<DeviceAction>,
    d: usize,
    p: Phase,
    dir: i32,
    timestamp: DateTime<Utc>,
) -> Result<(), FeederError> {
    let dev = &model.taps[d];
    guard.record(Key::Tap(d, p.index()), dir, &dev.id, p)?;
    let i = p.index();
    let from = state.taps[d][i];
    state.taps[d][i] = from + dir;
    state.taps_today[d][i] += 1;
    state.taps_total[d][i] += 1;
    actions.push(DeviceAction {
        timestamp,
        device: dev.id.clone(),
        kind: dev.kind.into(),
        phase: p,
        from,
        to: from + dir,
    });
    Ok(())
}
