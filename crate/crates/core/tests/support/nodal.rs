//! Independent power-flow references: random radial feeders, a dense
//! nodal-admittance solve and the closed-form 2-bus solution.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use umbra_core::feeder::*;

pub type C = Complex64;

/// 1 kV / 3 kVA base: impedances in Ω equal pu × 1000/3, powers in kW equal pu.
pub const Z_BASE: f64 = 1000.0 / 3.0;

pub struct Case {
    pub model: FeederModel,
    pub taps: Vec<[i32; 3]>,
    pub inj: Injections,
    /// Branch list for the oracle: (from, to, z pu per phase, tap device).
    pub branches: Vec<(usize, usize, [C; 3], Option<usize>)>,
}

pub fn random_case(rng: &mut ChaCha8Rng) -> Case {
    let n = rng.random_range(2..=10);
    let ids: Vec<String> = (0..n).map(|i| format!("b{i}")).collect();
    let mut phases = vec![PhaseSet::ABC; n];
    let mut parent = vec![0usize; n];
    let mut lines = Vec::new();
    let mut branches = Vec::new();
    for k in 1..n {
        parent[k] = rng.random_range(0..k);
        if rng.random_bool(0.2) {
            // single-phase lateral drawn from the parent's phases
            let avail: Vec<Phase> = phases[parent[k]].iter().collect();
            let p = avail[rng.random_range(0..avail.len())];
            phases[k] = PhaseSet::parse(&p.to_string()).unwrap();
        } else {
            phases[k] = phases[parent[k]];
        }
        let z: [C; 3] = std::array::from_fn(|_| C::new(rng.random_range(0.001..0.02), rng.random_range(0.001..0.03)));
        lines.push(LineSpec {
            id: format!("l{k}"),
            from: ids[parent[k]].clone(),
            to: ids[k].clone(),
            r_ohm: z.map(|z| z.re * Z_BASE),
            x_ohm: z.map(|z| z.im * Z_BASE),
        });
        branches.push((parent[k], k, z, None));
    }
    let mut regulators = Vec::new();
    let mut taps = Vec::new();
    for k in 1..n {
        if rng.random_bool(0.3) {
            let dev = regulators.len();
            regulators.push(RegulatorSpec {
                id: format!("r{k}"),
                bus: ids[k].clone(),
                phases: phases[k],
                settings: TapSettings::default(),
            });
            taps.push(std::array::from_fn(|_| rng.random_range(-16..=16)));
            branches[k - 1].3 = Some(dev);
        }
    }
    let spec = FeederSpec {
        name: "random".into(),
        base_kv_ll: 1.0,
        base_kva: 3.0,
        source: SourceSpec {
            bus: ids[0].clone(),
            voltage_pu: rng.random_range(0.97..1.05),
        },
        buses: (0..n)
            .map(|i| BusSpec {
                id: ids[i].clone(),
                distance_km: i as f64,
                phases: phases[i],
            })
            .collect(),
        lines,
        transformers: Vec::new(),
        regulators,
        capacitors: Vec::new(),
        loads: Vec::new(),
        pvs: Vec::new(),
    };
    let model = FeederModel::new(spec).unwrap();
    let mut inj = Injections::zero(&model);
    for (b, ph) in phases.iter().enumerate().skip(1) {
        for p in ph.iter() {
            let s = C::new(rng.random_range(-0.05..0.15), rng.random_range(-0.03..0.08));
            inj.add_pu(b, p, s);
        }
    }
    Case {
        model,
        taps,
        inj,
        branches,
    }
}

/// Dense Y-bus per phase, LU on the non-slack block, fixed point on the
/// constant-power currents.
pub fn nodal_solve(case: &Case, phase: Phase) -> Vec<Option<C>> {
    let m = &case.model;
    let n = m.bus_count();
    let live: Vec<usize> = (0..n).filter(|&b| m.bus_phases(b).contains(phase)).collect();
    let pos = |b: usize| live.iter().position(|&x| x == b);
    let k = live.len();
    let mut y = DMatrix::<C>::zeros(k, k);
    for &(f, t, z, dev) in &case.branches {
        let (Some(fi), Some(ti)) = (pos(f), pos(t)) else {
            continue;
        };
        let yb = C::new(1.0, 0.0) / z[phase.index()];
        let a = match dev {
            Some(d) if m.tap_phases(d).contains(phase) => m.tap_settings(d).ratio(case.taps[d][phase.index()]),
            _ => 1.0,
        };
        y[(fi, fi)] += yb;
        y[(fi, ti)] -= yb / a;
        y[(ti, fi)] -= yb / a;
        y[(ti, ti)] += yb / (a * a);
    }
    let s = pos(m.source_bus()).unwrap();
    let vs = C::from_polar(m.spec().source.voltage_pu, phase.angle());
    let others: Vec<usize> = (0..k).filter(|&i| i != s).collect();
    let yll = DMatrix::from_fn(others.len(), others.len(), |r, c| y[(others[r], others[c])]);
    let yls = DVector::from_fn(others.len(), |r, _| y[(others[r], s)]);
    let lu = yll.lu();
    let mut v = DVector::from_element(others.len(), vs);
    for _ in 0..if others.is_empty() { 0 } else { 500 } {
        let rhs = DVector::from_fn(others.len(), |r, _| {
            let bus = live[others[r]];
            -(case.inj.get(bus, phase) / v[r]).conj() - yls[r] * vs
        });
        let next = lu.solve(&rhs).unwrap();
        let delta = (&next - &v).iter().map(|d| d.norm()).fold(0.0, f64::max);
        v = next;
        if delta < 1e-13 {
            break;
        }
    }
    let mut out = vec![None; n];
    out[m.source_bus()] = Some(vs);
    for (r, &o) in others.iter().enumerate() {
        out[live[o]] = Some(v[r]);
    }
    out
}

/// Worst voltage difference against [`nodal_solve`] and worst power-balance
/// residual over `trials` random feeders, pu.
pub fn sweep_vs_nodal(seed: u64, trials: usize) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut worst_balance: f64 = 0.0;
    for _ in 0..trials {
        let case = random_case(&mut rng);
        let sol = solve_powerflow(&case.model, &case.taps, &case.inj).unwrap();
        for p in Phase::ALL {
            let reference = nodal_solve(&case, p);
            for (b, r) in reference.iter().enumerate() {
                match (r, sol.voltages[b][p.index()]) {
                    (Some(r), Some(v)) => worst = worst.max((r - v).norm()),
                    (None, None) => {}
                    other => panic!("phase presence differs at bus {b}: {other:?}"),
                }
            }
        }
        let balance = sol.source_power - case.inj.total() - sol.losses;
        worst_balance = worst_balance.max(balance.norm());
    }
    (worst, worst_balance)
}

/// Source and one load bus joined by a line of `z` pu on every phase.
pub fn two_bus(z: C, v1: f64) -> FeederModel {
    let bus = |id: &str, d: f64| BusSpec {
        id: id.into(),
        distance_km: d,
        phases: PhaseSet::ABC,
    };
    let spec = FeederSpec {
        name: "two".into(),
        base_kv_ll: 1.0,
        base_kva: 3.0,
        source: SourceSpec {
            bus: "s".into(),
            voltage_pu: v1,
        },
        buses: vec![bus("s", 0.0), bus("r", 1.0)],
        lines: vec![LineSpec {
            id: "l".into(),
            from: "s".into(),
            to: "r".into(),
            r_ohm: [z.re * Z_BASE; 3],
            x_ohm: [z.im * Z_BASE; 3],
        }],
        transformers: vec![],
        regulators: vec![],
        capacitors: vec![],
        loads: vec![],
        pvs: vec![],
    };
    FeederModel::new(spec).unwrap()
}

/// Receiving-end magnitude for load `s` through `z` from `v1`:
/// |V2|⁴ + (2(PR + QX) − |V1|²)|V2|² + |Z|²|S|² = 0, upper root.
pub fn two_bus_closed_form(z: C, s: C, v1: f64) -> f64 {
    let b = 2.0 * (s.re * z.re + s.im * z.im) - v1 * v1;
    let c = z.norm_sqr() * s.norm_sqr();
    ((-b + (b * b - 4.0 * c).sqrt()) / 2.0).sqrt()
}

/// Worst |V2| error of the sweep against the closed form over random
/// single-phase loads; unloaded phases must stay at the source voltage.
pub fn two_bus_error(seed: u64, trials: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let z = C::new(rng.random_range(0.001..0.05), rng.random_range(0.001..0.05));
        let s = C::new(rng.random_range(-0.3..0.5), rng.random_range(-0.2..0.3));
        let v1: f64 = rng.random_range(0.95..1.05);
        let m = two_bus(z, v1);
        let mut inj = Injections::zero(&m);
        inj.add_pu(1, Phase::C, s);
        let sol = solve_powerflow(&m, &[], &inj).unwrap();
        worst = worst.max((sol.magnitude(1, Phase::C).unwrap() - two_bus_closed_form(z, s, v1)).abs());
        worst = worst.max((sol.magnitude(1, Phase::A).unwrap() - v1).abs());
    }
    worst
}
