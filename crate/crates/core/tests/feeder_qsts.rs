use chrono::{Duration, TimeZone, Utc};
use umbra_core::demo;
use umbra_core::feeder::*;
use umbra_core::ingest::TimeWindow;
use umbra_core::perf::CorrectionMode;
use umbra_core::{AlignedSeries, Unit};

fn bus(id: &str, km: f64) -> BusSpec {
    BusSpec {
        id: id.into(),
        distance_km: km,
        phases: PhaseSet::ABC,
    }
}

fn line(id: &str, from: &str, to: &str, r: f64, x: f64) -> LineSpec {
    LineSpec {
        id: id.into(),
        from: from.into(),
        to: to.into(),
        r_ohm: [r; 3],
        x_ohm: [x; 3],
    }
}

/// src → b1 → b2 → b3 on a 12.47 kV / 3 MVA base; optional regulator at b1.
fn chain(source_pu: f64, load_kw: f64, regulator: Option<TapSettings>) -> FeederSpec {
    FeederSpec {
        name: "chain".into(),
        base_kv_ll: 12.47,
        base_kva: 3000.0,
        source: SourceSpec {
            bus: "src".into(),
            voltage_pu: source_pu,
        },
        buses: vec![bus("src", 0.0), bus("b1", 1.0), bus("b2", 3.0), bus("b3", 5.0)],
        lines: vec![
            line("l1", "src", "b1", 0.3, 0.6),
            line("l2", "b1", "b2", 0.6, 1.2),
            line("l3", "b2", "b3", 0.6, 1.2),
        ],
        transformers: vec![],
        regulators: regulator
            .map(|settings| RegulatorSpec {
                id: "reg".into(),
                bus: "b1".into(),
                phases: PhaseSet::ABC,
                settings,
            })
            .into_iter()
            .collect(),
        capacitors: vec![],
        loads: ["b2", "b3"]
            .iter()
            .map(|b| LoadSpec {
                bus: b.to_string(),
                p_kw: [load_kw; 3],
                q_kvar: [0.3 * load_kw; 3],
                profile: None,
            })
            .collect(),
        pvs: vec![],
    }
}

fn base(model: &FeederModel) -> Injections {
    let mut inj = Injections::zero(model);
    for l in &model.spec().loads {
        let b = model.bus_index(&l.bus).unwrap();
        for p in Phase::ALL {
            inj.add_load_kw(model, b, p, l.p_kw[p.index()], l.q_kvar[p.index()]);
        }
    }
    inj
}

fn t0() -> chrono::DateTime<Utc> {
    Utc.with_ymd_and_hms(2017, 8, 21, 12, 0, 0).unwrap()
}

fn flat(name: &str, unit: Unit, value: f64, start: chrono::DateTime<Utc>, n: usize) -> AlignedSeries {
    AlignedSeries::from_values(name, unit, start, 60, vec![value; n]).unwrap()
}

#[test]
fn in_band_needs_no_action() {
    let m = FeederModel::new(chain(1.0, 50.0, Some(TapSettings::default()))).unwrap();
    let mut state = DeviceState::initial(&m);
    let out = control_step(&m, &mut state, &base(&m), t0()).unwrap();
    assert!(out.actions.is_empty());
    assert!(out.violations.is_empty());
    assert_eq!(state.taps, vec![[0; 3]]);
}

#[test]
fn undervoltage_raises_taps_into_band() {
    let m = FeederModel::new(chain(0.94, 0.0, Some(TapSettings::default()))).unwrap();
    let mut state = DeviceState::initial(&m);
    let out = control_step(&m, &mut state, &base(&m), t0()).unwrap();
    assert!(!out.actions.is_empty());
    assert!(out.actions.iter().all(|a| a.to == a.from + 1));
    let (lo, hi) = TapSettings::default().band();
    for p in Phase::ALL {
        let v = out.solution.magnitude(m.bus_index("b1").unwrap(), p).unwrap();
        assert!((lo..=hi).contains(&v), "{v}");
        assert!(state.taps[0][p.index()] > 0);
    }
    // only the source bus itself stays low; nothing upstream can correct it
    assert!(out.violations.iter().all(|v| v.bus == "src"));
    assert_eq!(out.violations.len(), 3);
}

#[test]
fn saturated_regulator_flags_infeasibility() {
    let settings = TapSettings {
        initial_tap: 16,
        ..TapSettings::default()
    };
    let m = FeederModel::new(chain(0.84, 0.0, Some(settings))).unwrap();
    let mut state = DeviceState::initial(&m);
    let out = control_step(&m, &mut state, &base(&m), t0()).unwrap();
    assert!(out.actions.is_empty());
    assert_eq!(state.taps, vec![[16; 3]]);
    assert_eq!(out.exhausted.len(), 3);
    // every bus downstream of the regulator is below 0.95 and flagged
    assert!(out.violations.iter().any(|v| v.bus == "b3" && v.v_pu < ANSI_LOW_PU));
}

#[test]
fn daily_tap_budget_is_respected_and_resets() {
    let settings = TapSettings {
        max_daily_taps: 2,
        ..TapSettings::default()
    };
    let m = FeederModel::new(chain(0.94, 0.0, Some(settings))).unwrap();
    let mut state = DeviceState::initial(&m);
    state.roll_day(t0().date_naive());
    let out = control_step(&m, &mut state, &base(&m), t0()).unwrap();
    assert_eq!(state.taps, vec![[2; 3]]);
    assert_eq!(out.exhausted.len(), 3);
    let next = t0() + Duration::days(1);
    state.roll_day(next.date_naive());
    let out = control_step(&m, &mut state, &base(&m), next).unwrap();
    assert_eq!(out.actions.len(), 6);
    assert_eq!(state.taps, vec![[4; 3]]);
}

#[test]
fn capacitor_hunting_is_reported_as_oscillation() {
    let mut spec = chain(1.0, 400.0, None);
    spec.capacitors.push(CapacitorSpec {
        id: "cap".into(),
        bus: "b3".into(),
        phases: PhaseSet::ABC,
        q_max_kvar: 1500.0,
        // the swing from switching exceeds the deadband
        control: CapacitorControl::VoltageBand {
            on_pu: 0.99,
            off_pu: 0.995,
        },
        max_daily_switching: 100,
        initially_on: false,
    });
    let m = FeederModel::new(spec).unwrap();
    let mut state = DeviceState::initial(&m);
    match control_step(&m, &mut state, &base(&m), t0()) {
        Err(FeederError::ControlOscillation { device, .. }) => assert_eq!(device, "cap"),
        other => panic!("expected oscillation, got {other:?}"),
    }
}

#[test]
fn demo_eclipse_run_reproduces_the_qualitative_findings() {
    let m = FeederModel::new(demo::feeder_spec()).unwrap();
    let started = std::time::Instant::now();
    let run = run_qsts(&m, &demo::feeder_profiles(), &demo::day_window()).unwrap();
    assert!(started.elapsed().as_secs_f64() < 60.0);
    assert_eq!(run.states.len(), 1440);

    let ramp = demo::eclipse_window();
    let counts = run.tap_counts(&m, Some(&ramp));
    let totals: Vec<(&str, u32)> = m
        .tap_device_ids()
        .into_iter()
        .enumerate()
        .map(|(d, id)| (id, counts[d].iter().sum()))
        .collect();
    let (top, n) = totals
        .iter()
        .filter(|(id, _)| m.tap_kind(m.tap_device_index(id).unwrap()) == TapKind::Regulator)
        .max_by_key(|(_, n)| *n)
        .unwrap();
    // the regulator beside the larger plant works hardest
    assert_eq!(*top, "vreg3", "{totals:?}");
    assert!(totals.iter().filter(|(id, _)| id != top).all(|(_, k)| k < n));
    assert_eq!(run.total_taps(&m, "sub-ltc", None), 0);

    let pre = run.state_at(demo::local(13, 15)).unwrap();
    let peak = run.state_at(demo::local(14, 45)).unwrap();
    assert!(peak.loss_kw > pre.loss_kw, "{} vs {}", peak.loss_kw, pre.loss_kw);

    let report = audit(&m, &run);
    assert!(report.pass(), "{:?}", report.failures);
    assert_eq!(report.timesteps, 1440);
}

#[test]
fn qsts_is_deterministic() {
    let m = FeederModel::new(demo::feeder_spec()).unwrap();
    let w = demo::eclipse_window();
    let a = run_qsts(&m, &demo::feeder_profiles(), &w).unwrap();
    let b = run_qsts(&m, &demo::feeder_profiles(), &w).unwrap();
    assert_eq!(a, b);
}

#[test]
fn flat_profiles_settle_after_the_first_step() {
    let m = FeederModel::new(demo::feeder_spec()).unwrap();
    let start = demo::local(12, 0);
    let n = 120;
    let mut profiles = Profiles::new();
    profiles.insert("load".into(), flat("load", Unit::Dimensionless, 0.8, start, n));
    for k in ["irradiance_a", "irradiance_b"] {
        profiles.insert(k.into(), flat(k, Unit::WattPerSquareMeter, 600.0, start, n));
    }
    for k in ["module_temp_a", "module_temp_b"] {
        profiles.insert(k.into(), flat(k, Unit::Celsius, 40.0, start, n));
    }
    let w = TimeWindow::new(start, start + Duration::minutes(n as i64)).unwrap();
    let run = run_qsts(&m, &profiles, &w).unwrap();
    assert_eq!(run.states.len(), n);
    assert!(run.actions.iter().all(|a| a.timestamp == start));
}

#[test]
fn dark_pv_matches_the_model_without_pv() {
    let m = FeederModel::new(demo::feeder_spec()).unwrap();
    let mut profiles = demo::feeder_profiles();
    for k in ["irradiance_a", "irradiance_b"] {
        let dark = profiles[k].map(k, Unit::WattPerSquareMeter, |_| 0.0).unwrap();
        profiles.insert(k.into(), dark);
    }
    let w = demo::eclipse_window();
    let with = run_qsts(&m, &profiles, &w).unwrap();
    let bare = m.without_pv().unwrap();
    let without = run_qsts(&bare, &profiles, &w).unwrap();
    assert_eq!(with.actions, without.actions);
    for (a, b) in with.states.iter().zip(&without.states) {
        assert_eq!(a.voltages, b.voltages);
        assert_eq!(a.taps, b.taps);
        assert_eq!(a.loss_kw, b.loss_kw);
        assert!(a.pv_kw.iter().all(|&p| p == 0.0));
    }
}

fn state_for(model: &FeederModel, profiles: &Profiles, at: chrono::DateTime<Utc>) -> FeederState {
    let w = TimeWindow::new(at, at + Duration::minutes(1)).unwrap();
    run_qsts(model, profiles, &w).unwrap().states.remove(0)
}

#[test]
fn voltage_profile_is_flat_without_load() {
    let m = FeederModel::new(chain(1.02, 0.0, None)).unwrap();
    let s = state_for(&m, &Profiles::new(), t0());
    let profile = voltage_profile(&m, &s);
    assert_eq!(profile.len(), 12);
    assert!(profile.iter().all(|p| (p.v_pu - 1.02).abs() < 1e-12));
    assert!(profile.windows(2).all(|w| w[0].distance_km <= w[1].distance_km));
}

#[test]
fn voltage_profile_falls_along_a_loaded_chain() {
    let m = FeederModel::new(chain(1.03, 300.0, None)).unwrap();
    let s = state_for(&m, &Profiles::new(), t0());
    let profile = voltage_profile(&m, &s);
    for p in Phase::ALL {
        let v: Vec<f64> = profile.iter().filter(|x| x.phase == p).map(|x| x.v_pu).collect();
        assert!(v.windows(2).all(|w| w[1] < w[0]), "{v:?}");
    }
}

#[test]
fn pv_raises_its_local_voltage() {
    let mut spec = chain(1.0, 100.0, None);
    let bare = FeederModel::new(spec.clone()).unwrap();
    spec.pvs.push(PvSiteSpec {
        id: "pv".into(),
        bus: "b3".into(),
        phases: PhaseSet::ABC,
        system: demo::pv_system_b(),
        irradiance: "ir".into(),
        temperature: None,
        mode: CorrectionMode::ToStc,
    });
    let with = FeederModel::new(spec).unwrap();
    let mut profiles = Profiles::new();
    profiles.insert("ir".into(), flat("ir", Unit::WattPerSquareMeter, 1000.0, t0(), 1));
    let b3 = with.bus_index("b3").unwrap();
    let v_with = state_for(&with, &profiles, t0()).magnitude(b3, Phase::A).unwrap();
    let v_bare = state_for(&bare, &profiles, t0()).magnitude(b3, Phase::A).unwrap();
    assert!(v_with > v_bare, "{v_with} vs {v_bare}");
}

#[test]
fn missing_profile_is_named() {
    let mut spec = chain(1.0, 100.0, None);
    spec.loads[0].profile = Some("absent".into());
    let m = FeederModel::new(spec).unwrap();
    match run_qsts(
        &m,
        &Profiles::new(),
        &TimeWindow::new(t0(), t0() + Duration::minutes(5)).unwrap(),
    ) {
        Err(FeederError::MissingProfile { name, .. }) => assert_eq!(name, "absent"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn penetration_levels() {
    let m = FeederModel::new(demo::feeder_spec()).unwrap();
    assert!((penetration_level(&m).unwrap() - 37.0).abs() < 0.1);
    assert_eq!(penetration_level(&m.without_pv().unwrap()).unwrap(), 0.0);

    let mut spec = chain(1.0, 0.0, None);
    assert!(penetration_level(&FeederModel::new(spec.clone()).unwrap()).is_err());
    spec.loads[0].p_kw = [355.0 / 3.0; 3];
    spec.pvs.push(PvSiteSpec {
        id: "pv".into(),
        bus: "b3".into(),
        phases: PhaseSet::ABC,
        system: demo::pv_system_b(),
        irradiance: "ir".into(),
        temperature: None,
        mode: CorrectionMode::ToStc,
    });
    let full = penetration_level(&FeederModel::new(spec).unwrap()).unwrap();
    assert!((full - 100.0).abs() < 1e-9);
}
