//! Feeder description file and its validated, compiled form.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::FeederError;
use crate::perf::{CorrectionMode, PvSystemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    A,
    B,
    C,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::A, Phase::B, Phase::C];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Phase {
        Phase::ALL[i]
    }

    /// Nominal angle of the phase voltage, radians.
    pub fn angle(self) -> f64 {
        match self {
            Phase::A => 0.0,
            Phase::B => -2.0 * std::f64::consts::PI / 3.0,
            Phase::C => 2.0 * std::f64::consts::PI / 3.0,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Phase::A => "A",
            Phase::B => "B",
            Phase::C => "C",
        };
        f.write_str(c)
    }
}

/// Subset of {A, B, C}; written as a string such as `"abc"` or `"a"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct PhaseSet([bool; 3]);

impl PhaseSet {
    pub const ABC: PhaseSet = PhaseSet([true; 3]);

    pub fn contains(self, p: Phase) -> bool {
        self.0[p.index()]
    }

    pub fn iter(self) -> impl Iterator<Item = Phase> {
        Phase::ALL.into_iter().filter(move |p| self.contains(*p))
    }

    pub fn is_subset(self, other: PhaseSet) -> bool {
        (0..3).all(|i| !self.0[i] || other.0[i])
    }

    pub fn is_empty(self) -> bool {
        !self.0.iter().any(|b| *b)
    }

    pub fn len(self) -> usize {
        self.0.iter().filter(|b| **b).count()
    }

    pub fn parse(s: &str) -> Result<Self, String> {
        let mut set = [false; 3];
        for ch in s.chars() {
            let i = match ch.to_ascii_lowercase() {
                'a' => 0,
                'b' => 1,
                'c' => 2,
                _ => return Err(format!("invalid phase `{ch}` in `{s}`")),
            };
            set[i] = true;
        }
        let p = PhaseSet(set);
        if p.is_empty() {
            return Err("empty phase set".into());
        }
        Ok(p)
    }
}

impl fmt::Display for PhaseSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in self.iter() {
            write!(f, "{}", p.to_string().to_ascii_lowercase())?;
        }
        Ok(())
    }
}

impl Serialize for PhaseSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PhaseSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        PhaseSet::parse(&s).map_err(serde::de::Error::custom)
    }
}

fn abc() -> PhaseSet {
    PhaseSet::ABC
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub bus: String,
    #[serde(default = "one")]
    pub voltage_pu: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusSpec {
    pub id: String,
    /// Distance from the substation along the feeder, km.
    pub distance_km: f64,
    #[serde(default = "abc")]
    pub phases: PhaseSet,
}

/// Line segment with per-phase series impedance (mutual coupling neglected).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineSpec {
    pub id: String,
    pub from: String,
    pub to: String,
    pub r_ohm: [f64; 3],
    pub x_ohm: [f64; 3],
}

/// Tap changer settings shared by line regulators and substation LTCs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TapSettings {
    #[serde(default = "default_steps")]
    pub steps: u32,
    #[serde(default = "default_step_pct")]
    pub step_pct: f64,
    #[serde(default = "default_tap_low")]
    pub tap_low: i32,
    #[serde(default = "default_tap_high")]
    pub tap_high: i32,
    #[serde(default = "one")]
    pub band_center_pu: f64,
    /// Half-width of the control band, pu.
    #[serde(default = "default_bandwidth")]
    pub bandwidth_pu: f64,
    #[serde(default = "default_max_daily_taps")]
    pub max_daily_taps: u32,
    #[serde(default)]
    pub initial_tap: i32,
    /// Bus whose voltage is held in band; defaults to the device output bus.
    #[serde(default)]
    pub control_bus: Option<String>,
}

fn default_steps() -> u32 {
    32
}
fn default_step_pct() -> f64 {
    0.625
}
fn default_tap_low() -> i32 {
    -16
}
fn default_tap_high() -> i32 {
    16
}
fn default_bandwidth() -> f64 {
    0.01667
}
fn default_max_daily_taps() -> u32 {
    273
}

impl Default for TapSettings {
    fn default() -> Self {
        Self {
            steps: default_steps(),
            step_pct: default_step_pct(),
            tap_low: default_tap_low(),
            tap_high: default_tap_high(),
            band_center_pu: 1.0,
            bandwidth_pu: default_bandwidth(),
            max_daily_taps: default_max_daily_taps(),
            initial_tap: 0,
            control_bus: None,
        }
    }
}

impl TapSettings {
    pub fn ratio(&self, tap: i32) -> f64 {
        1.0 + tap as f64 * self.step_pct / 100.0
    }

    pub fn band(&self) -> (f64, f64) {
        (
            self.band_center_pu - self.bandwidth_pu,
            self.band_center_pu + self.bandwidth_pu,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformerSpec {
    pub id: String,
    pub from: String,
    pub to: String,
    /// Series resistance, % on the feeder base.
    pub r_pct: f64,
    /// Series reactance, % on the feeder base.
    pub x_pct: f64,
    #[serde(default)]
    pub ltc: Option<TapSettings>,
}

/// Line voltage regulator placed at the receiving end of the branch that
/// feeds `bus`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegulatorSpec {
    pub id: String,
    pub bus: String,
    #[serde(default = "abc")]
    pub phases: PhaseSet,
    #[serde(flatten)]
    pub settings: TapSettings,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CapacitorControl {
    Fixed,
    /// Switch on below `on_pu`, off above `off_pu`.
    VoltageBand {
        on_pu: f64,
        off_pu: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacitorSpec {
    pub id: String,
    pub bus: String,
    #[serde(default = "abc")]
    pub phases: PhaseSet,
    /// Rated (and maximum) injection per phase, kVAr.
    pub q_max_kvar: f64,
    pub control: CapacitorControl,
    #[serde(default = "default_max_switching")]
    pub max_daily_switching: u32,
    /// Initial state; fixed banks are always on.
    #[serde(default)]
    pub initially_on: bool,
}

fn default_max_switching() -> u32 {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadSpec {
    pub bus: String,
    /// Peak active power per phase, kW.
    pub p_kw: [f64; 3],
    /// Peak reactive power per phase, kVAr.
    pub q_kvar: [f64; 3],
    /// Name of a multiplier profile; constant 1.0 when absent.
    #[serde(default)]
    pub profile: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PvSiteSpec {
    pub id: String,
    pub bus: String,
    #[serde(default = "abc")]
    pub phases: PhaseSet,
    pub system: PvSystemSpec,
    /// Irradiance profile name, W/m².
    pub irradiance: String,
    /// Module temperature profile name, °C.
    #[serde(default)]
    pub temperature: Option<String>,
    #[serde(default)]
    pub mode: CorrectionMode,
}

/// On-disk feeder description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeederSpec {
    pub name: String,
    /// Line-to-line base voltage, kV.
    pub base_kv_ll: f64,
    /// Three-phase base power, kVA.
    pub base_kva: f64,
    pub source: SourceSpec,
    pub buses: Vec<BusSpec>,
    #[serde(default)]
    pub lines: Vec<LineSpec>,
    #[serde(default)]
    pub transformers: Vec<TransformerSpec>,
    #[serde(default)]
    pub regulators: Vec<RegulatorSpec>,
    #[serde(default)]
    pub capacitors: Vec<CapacitorSpec>,
    #[serde(default)]
    pub loads: Vec<LoadSpec>,
    #[serde(default)]
    pub pvs: Vec<PvSiteSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TapKind {
    Regulator,
    Ltc,
}

/// Branch between two buses; `tap` names the tap device at its receiving end.
#[derive(Debug, Clone)]
pub(crate) struct Branch {
    pub id: String,
    pub from: usize,
    pub to: usize,
    pub z: [Complex64; 3],
    pub tap: Option<usize>,
}

#[derive(Debug, Clone)]
pub(crate) struct TapDevice {
    pub id: String,
    pub kind: TapKind,
    pub branch: usize,
    pub phases: PhaseSet,
    pub settings: TapSettings,
    pub control_bus: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct Capacitor {
    pub id: String,
    pub bus: usize,
    pub phases: PhaseSet,
    pub q_pu: f64,
    pub q_max_kvar: f64,
    pub control: CapacitorControl,
    pub max_daily_switching: u32,
    pub initially_on: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct Load {
    pub bus: usize,
    pub s_pu: [Complex64; 3],
    pub profile: Option<String>,
}

#[derive(Debug, Clone)]
pub(crate) struct PvSite {
    pub bus: usize,
    pub phases: PhaseSet,
}

/// Validated radial feeder ready for power flow.
#[derive(Debug, Clone)]
pub struct FeederModel {
    spec: FeederSpec,
    pub(crate) bus_ids: Vec<String>,
    pub(crate) bus_phases: Vec<PhaseSet>,
    pub(crate) distance_km: Vec<f64>,
    pub(crate) source: usize,
    pub(crate) source_pu: f64,
    /// Breadth-first order from the source.
    pub(crate) order: Vec<usize>,
    /// Branch feeding each bus (`None` for the source).
    pub(crate) parent: Vec<Option<usize>>,
    pub(crate) children: Vec<Vec<usize>>,
    pub(crate) branches: Vec<Branch>,
    pub(crate) taps: Vec<TapDevice>,
    pub(crate) capacitors: Vec<Capacitor>,
    pub(crate) loads: Vec<Load>,
    pub(crate) pvs: Vec<PvSite>,
    /// Per-phase power base, kVA.
    pub(crate) phase_kva: f64,
}

impl FeederModel {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, FeederError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| FeederError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, FeederError> {
        let spec: FeederSpec = serde_json::from_str(text).map_err(|e| FeederError::Parse(e.to_string()))?;
        Self::new(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.spec).expect("feeder spec serializes")
    }

    pub fn spec(&self) -> &FeederSpec {
        &self.spec
    }

    pub fn bus_count(&self) -> usize {
        self.bus_ids.len()
    }

    pub fn bus_ids(&self) -> &[String] {
        &self.bus_ids
    }

    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.bus_ids.iter().position(|b| b == id)
    }

    pub fn bus_phases(&self, bus: usize) -> PhaseSet {
        self.bus_phases[bus]
    }

    pub fn distance_km(&self, bus: usize) -> f64 {
        self.distance_km[bus]
    }

    pub fn source_bus(&self) -> usize {
        self.source
    }

    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    pub fn tap_device_ids(&self) -> Vec<&str> {
        self.taps.iter().map(|t| t.id.as_str()).collect()
    }

    pub fn tap_kind(&self, device: usize) -> TapKind {
        self.taps[device].kind
    }

    pub fn tap_phases(&self, device: usize) -> PhaseSet {
        self.taps[device].phases
    }

    pub fn tap_settings(&self, device: usize) -> &TapSettings {
        &self.taps[device].settings
    }

    pub fn tap_device_index(&self, id: &str) -> Option<usize> {
        self.taps.iter().position(|t| t.id == id)
    }

    /// Bus at the output of a tap device.
    pub fn tap_bus(&self, device: usize) -> usize {
        self.branches[self.taps[device].branch].to
    }

    pub fn capacitor_ids(&self) -> Vec<&str> {
        self.capacitors.iter().map(|c| c.id.as_str()).collect()
    }

    pub fn pv_ids(&self) -> Vec<&str> {
        self.spec.pvs.iter().map(|p| p.id.as_str()).collect()
    }

    /// Per-phase impedance base, Ω.
    pub fn z_base_ohm(&self) -> f64 {
        self.spec.base_kv_ll.powi(2) * 1000.0 / self.spec.base_kva
    }

    pub fn phase_kva(&self) -> f64 {
        self.phase_kva
    }

    /// Branches from the source down to `bus`, nearest first.
    pub(crate) fn path_to_source(&self, bus: usize) -> impl Iterator<Item = usize> + '_ {
        let mut cur = bus;
        std::iter::from_fn(move || {
            let b = self.parent[cur]?;
            cur = self.branches[b].from;
            Some(b)
        })
    }

    fn is_downstream(&self, bus: usize, ancestor: usize) -> bool {
        bus == ancestor || self.path_to_source(bus).any(|b| self.branches[b].from == ancestor)
    }

    /// Copy of the description without PV sites.
    pub fn without_pv(&self) -> Result<Self, FeederError> {
        let mut spec = self.spec.clone();
        spec.pvs.clear();
        Self::new(spec)
    }

    pub fn new(spec: FeederSpec) -> Result<Self, FeederError> {
        let invalid = |m: String| Err(FeederError::Invalid(m));
        if !(spec.base_kv_ll > 0.0 && spec.base_kva > 0.0) {
            return invalid("base_kv_ll and base_kva must be positive".into());
        }
        if !(spec.source.voltage_pu > 0.0) {
            return invalid("source voltage must be positive".into());
        }
        let mut index: HashMap<&str, usize> = HashMap::new();
        for (i, b) in spec.buses.iter().enumerate() {
            if index.insert(b.id.as_str(), i).is_some() {
                return invalid(format!("duplicate bus `{}`", b.id));
            }
            if !b.distance_km.is_finite() || b.distance_km < 0.0 {
                return invalid(format!("bus `{}` has invalid distance", b.id));
            }
        }
        let bus = |id: &str| {
            index
                .get(id)
                .copied()
                .ok_or_else(|| FeederError::UnknownBus(id.to_string()))
        };
        let n = spec.buses.len();
        let source = bus(&spec.source.bus)?;
        let z_base = spec.base_kv_ll.powi(2) * 1000.0 / spec.base_kva;
        let phase_kva = spec.base_kva / 3.0;

        let mut branches = Vec::new();
        for l in &spec.lines {
            if l.r_ohm.iter().chain(&l.x_ohm).any(|v| !(v.is_finite() && *v >= 0.0)) {
                return invalid(format!("line `{}` has a negative or non-finite impedance", l.id));
            }
            branches.push(Branch {
                id: l.id.clone(),
                from: bus(&l.from)?,
                to: bus(&l.to)?,
                z: std::array::from_fn(|p| Complex64::new(l.r_ohm[p], l.x_ohm[p]) / z_base),
                tap: None,
            });
        }
        for t in &spec.transformers {
            if !(t.r_pct >= 0.0 && t.x_pct >= 0.0) {
                return invalid(format!("transformer `{}` has a negative impedance", t.id));
            }
            branches.push(Branch {
                id: t.id.clone(),
                from: bus(&t.from)?,
                to: bus(&t.to)?,
                z: [Complex64::new(t.r_pct, t.x_pct) / 100.0; 3],
                tap: None,
            });
        }

        // Radiality: undirected BFS from the source must reach every bus
        // exactly once.
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for (k, b) in branches.iter().enumerate() {
            if b.from == b.to {
                return Err(FeederError::Topology(format!("branch `{}` is a self loop", b.id)));
            }
            adj[b.from].push((b.to, k));
            adj[b.to].push((b.from, k));
        }
        let mut parent: Vec<Option<usize>> = vec![None; n];
        let mut seen = vec![false; n];
        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::from([source]);
        seen[source] = true;
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for &(v, k) in &adj[u] {
                if Some(k) == parent[u] {
                    continue;
                }
                if seen[v] {
                    return Err(FeederError::Topology(format!(
                        "loop through branch `{}` between `{}` and `{}`",
                        branches[k].id, spec.buses[u].id, spec.buses[v].id
                    )));
                }
                seen[v] = true;
                parent[v] = Some(k);
                // orient the branch away from the source
                if branches[k].from != u {
                    let b = &mut branches[k];
                    std::mem::swap(&mut b.from, &mut b.to);
                }
                queue.push_back(v);
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(FeederError::Connectivity(spec.buses[i].id.clone()));
        }
        let mut children = vec![Vec::new(); n];
        for (k, b) in branches.iter().enumerate() {
            children[b.from].push(k);
        }
        let bus_phases: Vec<PhaseSet> = spec.buses.iter().map(|b| b.phases).collect();
        for b in &branches {
            if !bus_phases[b.to].is_subset(bus_phases[b.from]) {
                return invalid(format!("bus `{}` has phases not present upstream", spec.buses[b.to].id));
            }
        }

        let mut model = FeederModel {
            bus_ids: spec.buses.iter().map(|b| b.id.clone()).collect(),
            bus_phases,
            distance_km: spec.buses.iter().map(|b| b.distance_km).collect(),
            source,
            source_pu: spec.source.voltage_pu,
            order,
            parent,
            children,
            branches,
            taps: Vec::new(),
            capacitors: Vec::new(),
            loads: Vec::new(),
            pvs: Vec::new(),
            phase_kva,
            spec: spec.clone(),
        };

        let add_tap = |model: &mut FeederModel,
                       id: &str,
                       kind: TapKind,
                       branch: usize,
                       phases: PhaseSet,
                       settings: &TapSettings|
         -> Result<(), FeederError> {
            let s = settings;
            if s.tap_low > s.tap_high
                || s.steps as i64 != (s.tap_high - s.tap_low) as i64
                || !(s.tap_low..=s.tap_high).contains(&s.initial_tap)
                || !(s.step_pct > 0.0)
                || !(s.bandwidth_pu > 0.0)
            {
                return Err(FeederError::Invalid(format!(
                    "tap device `{id}` has inconsistent settings"
                )));
            }
            let out = model.branches[branch].to;
            if !phases.is_subset(model.bus_phases[out]) {
                return Err(FeederError::Invalid(format!(
                    "tap device `{id}` phases not present at its bus"
                )));
            }
            if model.branches[branch].tap.is_some() {
                return Err(FeederError::Invalid(format!(
                    "branch `{}` already carries a tap device",
                    model.branches[branch].id
                )));
            }
            let control_bus = match &s.control_bus {
                Some(c) => model.bus_index(c).ok_or_else(|| FeederError::UnknownBus(c.clone()))?,
                None => out,
            };
            if !model.is_downstream(control_bus, out) {
                return Err(FeederError::Invalid(format!(
                    "control bus of `{id}` is not downstream of the device"
                )));
            }
            model.branches[branch].tap = Some(model.taps.len());
            model.taps.push(TapDevice {
                id: id.to_string(),
                kind,
                branch,
                phases,
                settings: s.clone(),
                control_bus,
            });
            Ok(())
        };

        for (k, t) in spec.transformers.iter().enumerate() {
            if let Some(ltc) = &t.ltc {
                let branch = spec.lines.len() + k;
                let phases = model.bus_phases[model.branches[branch].to];
                add_tap(&mut model, &t.id, TapKind::Ltc, branch, phases, ltc)?;
            }
        }
        for r in &spec.regulators {
            let b = bus(&r.bus)?;
            let branch = model.parent[b]
                .ok_or_else(|| FeederError::Invalid(format!("regulator `{}` sits on the source bus", r.id)))?;
            add_tap(&mut model, &r.id, TapKind::Regulator, branch, r.phases, &r.settings)?;
        }
        for c in &spec.capacitors {
            let b = bus(&c.bus)?;
            if !c.phases.is_subset(model.bus_phases[b]) || !(c.q_max_kvar >= 0.0) {
                return invalid(format!("capacitor `{}` is inconsistent with its bus", c.id));
            }
            if let CapacitorControl::VoltageBand { on_pu, off_pu } = c.control {
                if !(on_pu < off_pu) {
                    return invalid(format!("capacitor `{}` needs on_pu < off_pu", c.id));
                }
            }
            model.capacitors.push(Capacitor {
                id: c.id.clone(),
                bus: b,
                phases: c.phases,
                q_pu: c.q_max_kvar / phase_kva,
                q_max_kvar: c.q_max_kvar,
                control: c.control,
                max_daily_switching: c.max_daily_switching,
                initially_on: c.initially_on || c.control == CapacitorControl::Fixed,
            });
        }
        for l in &spec.loads {
            let b = bus(&l.bus)?;
            for p in Phase::ALL {
                let i = p.index();
                if !l.p_kw[i].is_finite() || !l.q_kvar[i].is_finite() {
                    return invalid(format!("load at `{}` is not finite", l.bus));
                }
                if !model.bus_phases[b].contains(p) && (l.p_kw[i] != 0.0 || l.q_kvar[i] != 0.0) {
                    return invalid(format!("load at `{}` on absent phase {p}", l.bus));
                }
            }
            model.loads.push(Load {
                bus: b,
                s_pu: std::array::from_fn(|i| Complex64::new(l.p_kw[i], l.q_kvar[i]) / phase_kva),
                profile: l.profile.clone(),
            });
        }
        let mut pv_ids = BTreeSet::new();
        for pv in &spec.pvs {
            let b = bus(&pv.bus)?;
            if !pv_ids.insert(pv.id.clone()) {
                return invalid(format!("duplicate PV `{}`", pv.id));
            }
            pv.system.validate().map_err(|e| FeederError::Invalid(e.to_string()))?;
            if !pv.phases.is_subset(model.bus_phases[b]) {
                return invalid(format!("PV `{}` phases not present at its bus", pv.id));
            }
            model.pvs.push(PvSite {
                bus: b,
                phases: pv.phases,
            });
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(extra_lines: serde_json::Value) -> serde_json::Value {
        serde_json::json!({
            "name": "t",
            "base_kv_ll": 12.47,
            "base_kva": 3000.0,
            "source": {"bus": "s"},
            "buses": [
                {"id": "s", "distance_km": 0.0},
                {"id": "a", "distance_km": 1.0},
                {"id": "b", "distance_km": 2.0}
            ],
            "lines": extra_lines
        })
    }

    fn line(id: &str, from: &str, to: &str) -> serde_json::Value {
        serde_json::json!({"id": id, "from": from, "to": to, "r_ohm": [0.3, 0.3, 0.3], "x_ohm": [0.6, 0.6, 0.6]})
    }

    #[test]
    fn minimal_two_bus() {
        let m = FeederModel::from_json(
            r#"{"name":"m","base_kv_ll":1,"base_kva":3,"source":{"bus":"s"},
                "buses":[{"id":"s","distance_km":0},{"id":"r","distance_km":1}],
                "lines":[{"id":"l","from":"s","to":"r","r_ohm":[1,1,1],"x_ohm":[1,1,1]}]}"#,
        )
        .unwrap();
        assert_eq!(m.branch_count(), 1);
        assert_eq!(m.bus_count(), 2);
    }

    #[test]
    fn loop_is_topology_error() {
        let s = spec(serde_json::json!([
            line("1", "s", "a"),
            line("2", "a", "b"),
            line("3", "b", "s")
        ]));
        let err = FeederModel::from_json(&s.to_string()).unwrap_err();
        assert!(matches!(err, FeederError::Topology(_)), "{err}");
    }

    #[test]
    fn dangling_bus_is_connectivity_error() {
        let s = spec(serde_json::json!([line("1", "s", "a")]));
        let err = FeederModel::from_json(&s.to_string()).unwrap_err();
        assert!(matches!(err, FeederError::Connectivity(ref b) if b == "b"), "{err}");
    }

    #[test]
    fn branches_are_oriented_from_source() {
        let s = spec(serde_json::json!([line("1", "a", "s"), line("2", "b", "a")]));
        let m = FeederModel::from_json(&s.to_string()).unwrap();
        let b = m.bus_index("b").unwrap();
        let path: Vec<&str> = m.path_to_source(b).map(|k| m.branches[k].id.as_str()).collect();
        assert_eq!(path, ["2", "1"]);
    }

    #[test]
    fn negative_impedance_rejected() {
        let mut l = line("1", "s", "a");
        l["r_ohm"] = serde_json::json!([0.1, -0.1, 0.1]);
        let s = spec(serde_json::json!([l, line("2", "a", "b")]));
        assert!(matches!(
            FeederModel::from_json(&s.to_string()),
            Err(FeederError::Invalid(_))
        ));
    }

    #[test]
    fn phase_set_round_trip() {
        let p = PhaseSet::parse("ca").unwrap();
        assert_eq!(p.to_string(), "ac");
        assert!(p.is_subset(PhaseSet::ABC));
        assert!(PhaseSet::parse("").is_err());
        assert!(PhaseSet::parse("ad").is_err());
    }

    #[test]
    fn tap_defaults() {
        let t = TapSettings::default();
        assert_eq!(t.steps, 32);
        assert_eq!((t.tap_low, t.tap_high), (-16, 16));
        assert!((t.ratio(16) - 1.1).abs() < 1e-12);
        assert_eq!(t.max_daily_taps, 273);
    }
}
