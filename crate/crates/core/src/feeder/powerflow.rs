//! Per-phase forward-backward sweep on a radial feeder.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::model::{FeederModel, Phase};
use super::FeederError;

pub const TOLERANCE_PU: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 100;

/// Net complex power drawn at each bus and phase, pu on the per-phase base.
/// Generation enters with a negative sign.
#[derive(Debug, Clone, PartialEq)]
pub struct Injections {
    pub(crate) s: Vec<[Complex64; 3]>,
}

impl Injections {
    pub fn zero(model: &FeederModel) -> Self {
        Self {
            s: vec![[Complex64::new(0.0, 0.0); 3]; model.bus_count()],
        }
    }

    /// Adds a constant-power load in kW / kVAr.
    pub fn add_load_kw(&mut self, model: &FeederModel, bus: usize, phase: Phase, p_kw: f64, q_kvar: f64) {
        self.s[bus][phase.index()] += Complex64::new(p_kw, q_kvar) / model.phase_kva();
    }

    pub fn add_pu(&mut self, bus: usize, phase: Phase, s: Complex64) {
        self.s[bus][phase.index()] += s;
    }

    pub fn get(&self, bus: usize, phase: Phase) -> Complex64 {
        self.s[bus][phase.index()]
    }

    pub fn total(&self) -> Complex64 {
        self.s.iter().flatten().sum()
    }
}

/// Tap position per tap device and phase.
pub type TapPositions = Vec<[i32; 3]>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerFlowSolution {
    /// Per-bus per-phase voltage, pu; `None` on absent phases.
    pub voltages: Vec<[Option<Complex64>; 3]>,
    /// Current entering each branch at its sending end, pu.
    pub branch_currents: Vec<[Complex64; 3]>,
    /// Complex power supplied by the source, pu.
    pub source_power: Complex64,
    /// Series losses Σ|I|²Z, pu.
    pub losses: Complex64,
    pub iterations: usize,
}

impl PowerFlowSolution {
    pub fn magnitude(&self, bus: usize, phase: Phase) -> Option<f64> {
        self.voltages[bus][phase.index()].map(|v| v.norm())
    }

    pub fn loss_kw(&self, model: &FeederModel) -> f64 {
        self.losses.re * model.phase_kva()
    }

    pub fn loss_kvar(&self, model: &FeederModel) -> f64 {
        self.losses.im * model.phase_kva()
    }
}

/// Solves the feeder for constant-power injections at the given tap
/// positions. Each tap device is an ideal autotransformer at the receiving
/// end of its branch: `V_out = a·V_mid`, `I_mid = a·I_out`.
pub fn solve_powerflow(
    model: &FeederModel,
    taps: &[[i32; 3]],
    injections: &Injections,
) -> Result<PowerFlowSolution, FeederError> {
    let n = model.bus_count();
    let nb = model.branch_count();
    if taps.len() != model.taps.len() || injections.s.len() != n {
        return Err(FeederError::Invalid(
            "tap or injection vector does not match the model".into(),
        ));
    }
    let ratio = |branch: usize, p: usize| -> f64 {
        match model.branches[branch].tap {
            Some(d) if model.taps[d].phases.contains(Phase::from_index(p)) => model.taps[d].settings.ratio(taps[d][p]),
            _ => 1.0,
        }
    };

    let mut voltages = vec![[None; 3]; n];
    let mut currents = vec![[Complex64::new(0.0, 0.0); 3]; nb];
    let mut iterations = 0;
    let mut trace = Vec::new();

    for p in 0..3 {
        let phase = Phase::from_index(p);
        let live: Vec<bool> = (0..n).map(|b| model.bus_phases[b].contains(phase)).collect();
        let vs = Complex64::from_polar(model.source_pu, phase.angle());
        let mut v = vec![Complex64::new(0.0, 0.0); n];
        if !live[model.source] {
            continue;
        }
        v[model.source] = vs;
        for &b in &model.order[1..] {
            if live[b] {
                let k = model.parent[b].unwrap();
                v[b] = v[model.branches[k].from] * ratio(k, p);
            }
        }
        let mut i_in = vec![Complex64::new(0.0, 0.0); nb];
        let mut converged = false;
        let mut phase_trace = Vec::new();
        for it in 1..=MAX_ITERATIONS {
            backward(model, p, &live, &v, injections, &ratio, &mut i_in)?;
            let mut delta: f64 = 0.0;
            for &b in &model.order[1..] {
                if !live[b] {
                    continue;
                }
                let k = model.parent[b].unwrap();
                let br = &model.branches[k];
                let new = (v[br.from] - br.z[p] * i_in[k]) * ratio(k, p);
                delta = delta.max((new - v[b]).norm());
                v[b] = new;
            }
            phase_trace.push(delta);
            if !delta.is_finite() {
                break;
            }
            if delta < TOLERANCE_PU {
                iterations = iterations.max(it);
                converged = true;
                break;
            }
        }
        if !converged {
            trace.extend(phase_trace);
            return Err(FeederError::Divergence { phase, trace });
        }
        // currents consistent with the final voltages
        backward(model, p, &live, &v, injections, &ratio, &mut i_in)?;
        for b in 0..n {
            if live[b] {
                voltages[b][p] = Some(v[b]);
            }
        }
        for k in 0..nb {
            currents[k][p] = i_in[k];
        }
    }

    let mut losses = Complex64::new(0.0, 0.0);
    for (k, br) in model.branches.iter().enumerate() {
        for (z, i) in br.z.iter().zip(&currents[k]) {
            losses += z * i.norm_sqr();
        }
    }
    let mut source_power = Complex64::new(0.0, 0.0);
    for p in 0..3 {
        let Some(vs) = voltages[model.source][p] else { continue };
        let mut i = injection_current(injections.s[model.source][p], vs);
        for &k in &model.children[model.source] {
            i += currents[k][p];
        }
        source_power += vs * i.conj();
    }
    Ok(PowerFlowSolution {
        voltages,
        branch_currents: currents,
        source_power,
        losses,
        iterations,
    })
}

fn injection_current(s: Complex64, v: Complex64) -> Complex64 {
    (s / v).conj()
}

fn backward(
    model: &FeederModel,
    p: usize,
    live: &[bool],
    v: &[Complex64],
    injections: &Injections,
    ratio: &impl Fn(usize, usize) -> f64,
    i_in: &mut [Complex64],
) -> Result<(), FeederError> {
    for &b in model.order[1..].iter().rev() {
        if !live[b] {
            continue;
        }
        if v[b].norm() == 0.0 {
            return Err(FeederError::Collapse(model.bus_ids[b].clone()));
        }
        let k = model.parent[b].unwrap();
        let mut i_out = injection_current(injections.s[b][p], v[b]);
        for &c in &model.children[b] {
            i_out += i_in[c];
        }
        i_in[k] = i_out * ratio(k, p);
    }
    Ok(())
}
