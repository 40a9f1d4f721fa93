//! Deterministic synthetic inputs for the bundled eclipse scenario.
//!
//! Nothing here is measured data. The shapes are chosen so that every
//! analysis has something meaningful to chew on: a clear-sky day with a 70 %
//! irradiance dip over a 90 minute ramp, a 12-bus feeder with two PV plants,
//! and a few years of daily weather and interruption counts.

use chrono::{DateTime, Duration, NaiveDate, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::feeder::{
    BusSpec, CapacitorControl, CapacitorSpec, FeederSpec, LineSpec, LoadSpec, PhaseSet, Profiles, PvSiteSpec,
    RegulatorSpec, SourceSpec, TapSettings, TransformerSpec,
};
use crate::ingest::{AlignedSeries, ReliabilityRecord, TimeWindow, Unit};
use crate::perf::{CorrectionMode, PvSystemSpec};

/// Local clock offset from UTC used by the scenario, hours.
pub const UTC_OFFSET_H: i64 = -4;

pub fn eclipse_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2017, 8, 21).unwrap()
}

/// UTC instant of a local wall-clock time on the scenario day.
pub fn local(hour: u32, minute: u32) -> DateTime<Utc> {
    let naive = eclipse_date().and_hms_opt(hour, minute, 0).unwrap();
    Utc.from_utc_datetime(&naive) - Duration::hours(UTC_OFFSET_H)
}

/// Local midnight to local midnight.
pub fn day_window() -> TimeWindow {
    TimeWindow::new(local(0, 0), local(0, 0) + Duration::days(1)).unwrap()
}

/// Eclipse interval: first contact to last contact.
pub fn eclipse_window() -> TimeWindow {
    TimeWindow::new(
        local(ECLIPSE.start.0, ECLIPSE.start.1),
        local(ECLIPSE.end.0, ECLIPSE.end.1),
    )
    .unwrap()
}

/// Irradiance dip as local (hour, minute) marks and the fractional depth.
#[derive(Debug, Clone, Copy)]
pub struct EclipseShape {
    pub start: (u32, u32),
    pub peak: (u32, u32),
    pub end: (u32, u32),
    pub depth: f64,
}

pub const ECLIPSE: EclipseShape = EclipseShape {
    start: (13, 15),
    peak: (14, 45),
    end: (16, 10),
    depth: 0.7,
};

fn hours(hm: (u32, u32)) -> f64 {
    hm.0 as f64 + hm.1 as f64 / 60.0
}

/// Multiplier applied to clear-sky irradiance at local hour `h`.
pub fn eclipse_factor(h: f64) -> f64 {
    let (s, p, e) = (hours(ECLIPSE.start), hours(ECLIPSE.peak), hours(ECLIPSE.end));
    let covered = if h <= s || h >= e {
        0.0
    } else if h <= p {
        (h - s) / (p - s)
    } else {
        (e - h) / (e - p)
    };
    1.0 - ECLIPSE.depth * covered
}

/// Clear-sky plane-of-array irradiance, W/m², at local hour `h`.
pub fn clear_sky(h: f64) -> f64 {
    let (rise, set) = (6.75, 20.0);
    if h <= rise || h >= set {
        return 0.0;
    }
    let x = std::f64::consts::PI * (h - rise) / (set - rise);
    980.0 * x.sin().powf(1.3)
}

/// Feeder load multiplier (peak 1.0) at local hour `h`.
pub fn load_multiplier(h: f64) -> f64 {
    let g = |mu: f64, sigma: f64| (-(h - mu).powi(2) / (2.0 * sigma * sigma)).exp();
    0.55 + 0.12 * g(8.0, 1.5) + 0.33 * g(17.0, 3.0)
}

/// Module temperature, °C, given irradiance and local hour.
pub fn module_temperature(h: f64, irradiance: f64) -> f64 {
    let ambient = 24.0 + 7.0 * (std::f64::consts::PI * (h - 9.0) / 12.0).sin().max(-0.6);
    ambient + 0.028 * irradiance
}

fn local_hour(t: DateTime<Utc>) -> f64 {
    let l = t + Duration::hours(UTC_OFFSET_H);
    let secs = (l - Utc.from_utc_datetime(&l.date_naive().and_hms_opt(0, 0, 0).unwrap())).num_seconds();
    secs as f64 / 3600.0
}

fn sample(window: &TimeWindow, res_s: u32, name: &str, unit: Unit, f: impl Fn(f64) -> f64) -> AlignedSeries {
    let n = ((window.end - window.start).num_seconds() / res_s as i64) as usize;
    let values = (0..n)
        .map(|i| Some(f(local_hour(window.start + Duration::seconds(i as i64 * res_s as i64)))))
        .collect();
    AlignedSeries::new(name, unit, window.start, res_s, values).expect("finite demo samples")
}

pub fn pv_system_a() -> PvSystemSpec {
    PvSystemSpec {
        name: "PV A".into(),
        p_dc: 1400.0,
        p_dirt: 0.98,
        p_mismatch: 0.98,
        p_cable: 0.99,
        p_inverter: 0.96,
        temp_coeff_pct: -0.40,
        t_cell_avg: None,
    }
}

pub fn pv_system_b() -> PvSystemSpec {
    PvSystemSpec {
        name: "PV B".into(),
        p_dc: 355.0,
        p_dirt: 0.98,
        p_mismatch: 0.98,
        p_cable: 0.99,
        p_inverter: 0.96,
        temp_coeff_pct: -0.45,
        t_cell_avg: None,
    }
}

fn bus(id: &str, km: f64) -> BusSpec {
    BusSpec {
        id: id.into(),
        distance_km: km,
        phases: PhaseSet::ABC,
    }
}

fn line(from: &str, to: &str, km: f64, r_per_km: [f64; 3], x_per_km: f64) -> LineSpec {
    LineSpec {
        id: format!("{from}-{to}"),
        from: from.into(),
        to: to.into(),
        r_ohm: r_per_km.map(|r| r * km),
        x_ohm: [x_per_km * km; 3],
    }
}

fn regulator(id: &str, bus: &str, bandwidth: f64) -> RegulatorSpec {
    RegulatorSpec {
        id: id.into(),
        bus: bus.into(),
        phases: PhaseSet::ABC,
        settings: TapSettings {
            band_center_pu: 1.0,
            bandwidth_pu: bandwidth,
            ..TapSettings::default()
        },
    }
}

fn capacitor(id: &str, bus: &str, kvar: f64, control: CapacitorControl) -> CapacitorSpec {
    CapacitorSpec {
        id: id.into(),
        bus: bus.into(),
        phases: PhaseSet::ABC,
        q_max_kvar: kvar,
        control,
        max_daily_switching: 10,
        initially_on: false,
    }
}

fn load(bus: &str, kw: [f64; 3]) -> LoadSpec {
    LoadSpec {
        bus: bus.into(),
        p_kw: kw,
        q_kvar: kw.map(|p| p * 0.33),
        profile: Some("load".into()),
    }
}

/// Twelve-bus radial feeder: a 17 km trunk with a lateral, a substation
/// LTC, three line regulators, four capacitor banks (one fixed) and two PV
/// plants totalling 1755 kW against 4743 kW of peak load.
pub fn feeder_spec() -> FeederSpec {
    // slightly unbalanced conductor resistance gives per-phase tap asymmetry
    let trunk = [0.33, 0.35, 0.37];
    let lateral = [0.35, 0.37, 0.36];
    let band = |on_pu, off_pu| CapacitorControl::VoltageBand { on_pu, off_pu };
    FeederSpec {
        name: "eclipse-demo-12".into(),
        base_kv_ll: 12.47,
        base_kva: 3000.0,
        source: SourceSpec {
            bus: "src".into(),
            voltage_pu: 1.03,
        },
        buses: vec![
            bus("src", 0.0),
            bus("sub", 0.0),
            bus("n1", 2.0),
            bus("n2", 3.75),
            bus("n3", 5.0),
            bus("n4", 7.0),
            bus("n5", 9.0),
            bus("n6", 10.5),
            bus("n7", 12.5),
            bus("n8", 17.0),
            bus("n9", 10.0),
            bus("n10", 12.0),
        ],
        lines: vec![
            line("sub", "n1", 2.0, trunk, 0.42),
            line("n1", "n2", 1.75, trunk, 0.42),
            line("n2", "n3", 1.25, trunk, 0.42),
            line("n3", "n4", 2.0, trunk, 0.42),
            line("n4", "n5", 2.0, trunk, 0.42),
            line("n5", "n6", 1.5, trunk, 0.42),
            line("n6", "n7", 2.0, trunk, 0.42),
            line("n7", "n8", 4.5, lateral, 0.45),
            line("n5", "n9", 1.0, lateral, 0.45),
            line("n9", "n10", 2.0, lateral, 0.45),
        ],
        transformers: vec![TransformerSpec {
            id: "sub-ltc".into(),
            from: "src".into(),
            to: "sub".into(),
            r_pct: 0.3,
            x_pct: 2.0,
            ltc: Some(TapSettings {
                band_center_pu: 1.0,
                bandwidth_pu: 0.03,
                ..TapSettings::default()
            }),
        }],
        regulators: vec![
            regulator("vreg1", "n3", 0.01),
            regulator("vreg2", "n9", 0.01),
            RegulatorSpec {
                settings: TapSettings {
                    control_bus: Some("n7".into()),
                    ..regulator("vreg3", "n6", 0.007).settings
                },
                ..regulator("vreg3", "n6", 0.007)
            },
        ],
        capacitors: vec![
            capacitor("cap0", "n4", 150.0, CapacitorControl::Fixed),
            capacitor("cap1", "n2", 150.0, band(0.985, 1.03)),
            capacitor("cap2", "n8", 100.0, band(0.99, 1.035)),
            capacitor("cap3", "n10", 100.0, band(0.99, 1.035)),
        ],
        loads: vec![
            load("n1", [230.0, 225.0, 235.0]),
            load("n2", [200.0, 195.0, 205.0]),
            load("n3", [180.0, 185.0, 175.0]),
            load("n4", [210.0, 200.0, 205.0]),
            load("n5", [150.0, 160.0, 155.0]),
            load("n6", [120.0, 115.0, 125.0]),
            load("n7", [140.0, 145.0, 135.0]),
            load("n8", [110.0, 105.0, 115.0]),
            load("n9", [90.0, 95.0, 85.0]),
            load("n10", [152.0, 150.0, 151.0]),
        ],
        pvs: vec![
            PvSiteSpec {
                id: "pv_a".into(),
                bus: "n7".into(),
                phases: PhaseSet::ABC,
                system: pv_system_a(),
                irradiance: "irradiance_a".into(),
                temperature: Some("module_temp_a".into()),
                mode: CorrectionMode::ToStc,
            },
            PvSiteSpec {
                id: "pv_b".into(),
                bus: "n2".into(),
                phases: PhaseSet::ABC,
                system: pv_system_b(),
                irradiance: "irradiance_b".into(),
                temperature: Some("module_temp_b".into()),
                mode: CorrectionMode::ToStc,
            },
        ],
    }
}

/// Noise-free 1-min feeder profiles over [`day_window`].
pub fn feeder_profiles() -> Profiles {
    let w = day_window();
    let ir = |h: f64| clear_sky(h) * eclipse_factor(h);
    // plant B sits a little further from the path of greatest coverage
    let ir_b = |h: f64| clear_sky(h) * (1.0 - 0.93 * (1.0 - eclipse_factor(h)));
    let mut p = Profiles::new();
    p.insert(
        "load".into(),
        sample(&w, 60, "load", Unit::Dimensionless, load_multiplier),
    );
    p.insert(
        "irradiance_a".into(),
        sample(&w, 60, "irradiance_a", Unit::WattPerSquareMeter, ir),
    );
    p.insert(
        "irradiance_b".into(),
        sample(&w, 60, "irradiance_b", Unit::WattPerSquareMeter, ir_b),
    );
    p.insert(
        "module_temp_a".into(),
        sample(&w, 60, "module_temp_a", Unit::Celsius, |h| module_temperature(h, ir(h))),
    );
    p.insert(
        "module_temp_b".into(),
        sample(&w, 60, "module_temp_b", Unit::Celsius, |h| {
            module_temperature(h, ir_b(h))
        }),
    );
    p
}

/// Measured-looking PV plant channels over [`day_window`]: irradiance,
/// module temperature, ambient temperature and AC power with seeded noise.
pub struct PvChannels {
    pub irradiance: AlignedSeries,
    pub module_temperature: AlignedSeries,
    pub ambient_temperature: AlignedSeries,
    pub power: AlignedSeries,
}

pub fn pv_channels(spec: &PvSystemSpec, coverage_scale: f64, seed: u64) -> PvChannels {
    let w = day_window();
    let n = ((w.end - w.start).num_seconds() / 60) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ir = Vec::with_capacity(n);
    let mut tm = Vec::with_capacity(n);
    let mut ta = Vec::with_capacity(n);
    let mut pw = Vec::with_capacity(n);
    let derate = crate::perf::derate(spec);
    for i in 0..n {
        let h = local_hour(w.start + Duration::minutes(i as i64));
        let factor = 1.0 - coverage_scale * (1.0 - eclipse_factor(h));
        let clear = clear_sky(h);
        let g = (clear * factor * (1.0 + rng.random_range(-0.01..0.01))).max(0.0);
        let amb = 24.0 + 7.0 * (std::f64::consts::PI * (h - 9.0) / 12.0).sin().max(-0.6) + rng.random_range(-0.2..0.2);
        let module = amb + 0.028 * g;
        // real plants under-perform the nameplate model slightly
        let x = 1.0 + spec.temp_coeff_pct / 100.0 * (module - 25.0);
        let p = (spec.p_dc * g / 1000.0 * x * derate * 0.97 * (1.0 + rng.random_range(-0.015..0.015))).max(0.0);
        ir.push(Some(round(g, 2)));
        tm.push(Some(round(module, 2)));
        ta.push(Some(round(amb, 2)));
        pw.push(Some(round(p, 3)));
    }
    let s = |name: &str, unit, v| AlignedSeries::new(name, unit, w.start, 60, v).expect("finite demo samples");
    PvChannels {
        irradiance: s("irradiance", Unit::WattPerSquareMeter, ir),
        module_temperature: s("module_temp", Unit::Celsius, tm),
        ambient_temperature: s("ambient_temp", Unit::Celsius, ta),
        power: s("power", Unit::Kilowatt, pw),
    }
}

fn round(x: f64, digits: i32) -> f64 {
    let k = 10f64.powi(digits);
    (x * k).round() / k
}

/// Power-quality meter channels at the PV A point of interconnection.
pub struct MeterChannels {
    /// Phase RMS voltages, V.
    pub voltage: [AlignedSeries; 3],
    /// Phase voltage THD, %.
    pub voltage_thd: [AlignedSeries; 3],
    /// Phase current THD, %.
    pub current_thd: [AlignedSeries; 3],
    /// Phase RMS currents, A.
    pub current: [AlignedSeries; 3],
}

/// One-second meter channels for the eclipse interval. Voltages fluctuate
/// more as irradiance ramps.
pub fn meter_channels(seed: u64) -> MeterChannels {
    let w = eclipse_window();
    let n = (w.end - w.start).num_seconds() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phases = ["a", "b", "c"];
    let offsets = [0.0, 1.1, -0.8];
    let mut v: [Vec<Option<f64>>; 3] = Default::default();
    let mut vthd: [Vec<Option<f64>>; 3] = Default::default();
    let mut ithd: [Vec<Option<f64>>; 3] = Default::default();
    let mut cur: [Vec<Option<f64>>; 3] = Default::default();
    for i in 0..n {
        let h = local_hour(w.start + Duration::seconds(i as i64));
        let cover = 1.0 - eclipse_factor(h);
        for p in 0..3 {
            let wobble = (i as f64 / 7.0 + p as f64).sin() * 0.35;
            let volts = 277.0 - 2.5 * cover + offsets[p] + wobble + rng.random_range(-0.25..0.25);
            let amps = 65.0 * (1.0 - 0.7 * cover) + rng.random_range(-0.5..0.5);
            v[p].push(Some(round(volts, 3)));
            vthd[p].push(Some(round(1.1 + 0.2 * cover + rng.random_range(-0.05..0.05), 3)));
            ithd[p].push(Some(round(2.4 + 3.0 * cover + rng.random_range(-0.1..0.1), 3)));
            cur[p].push(Some(round(amps, 3)));
        }
    }
    let mk = |prefix: &str, unit: Unit, data: [Vec<Option<f64>>; 3]| -> [AlignedSeries; 3] {
        let mut it = data.into_iter().enumerate().map(|(p, vals)| {
            AlignedSeries::new(format!("{prefix}_{}", phases[p]), unit, w.start, 1, vals).expect("finite demo samples")
        });
        [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()]
    };
    MeterChannels {
        voltage: mk("v", Unit::Volt, v),
        voltage_thd: mk("vthd", Unit::Percent, vthd),
        current_thd: mk("ithd", Unit::Percent, ithd),
        current: mk("i", Unit::Ampere, cur),
    }
}

/// Daily weather and interruption counts with a known nonlinear link:
/// interruptions grow with wind, precipitation and lightning and with heat.
pub fn reliability_records(days: usize, seed: u64) -> Vec<ReliabilityRecord> {
    let start = NaiveDate::from_ymd_opt(2015, 1, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..days)
        .map(|d| {
            let doy = d as f64 / 365.25 * 2.0 * std::f64::consts::PI;
            let temperature = 22.0 + 6.0 * (doy - 1.9).sin() + rng.random_range(-2.5..2.5);
            let wind: f64 = (4.0 + 1.5 * (doy + 0.5).cos() + rng.random_range(-2.0..3.5)).max(0.2);
            let stormy = rng.random_bool(0.25 + 0.15 * (doy - 1.9).sin().max(0.0));
            let precipitation: f64 = if stormy {
                rng.random_range(0.5..40.0)
            } else {
                rng.random_range(0.0..0.6)
            };
            let pressure = 1015.0 - 0.12 * precipitation + rng.random_range(-3.0..3.0);
            let lightning: f64 = if stormy && rng.random_bool(0.6) {
                rng.random_range(0.0..120.0f64).floor()
            } else {
                0.0
            };
            let rate = 2.0
                + 0.18 * (temperature - 22.0).max(0.0)
                + 0.07 * wind * wind
                + 0.09 * precipitation
                + 0.035 * lightning
                + 0.08 * (1012.0 - pressure).max(0.0);
            let noise: f64 = rng.random_range(-0.15..0.15);
            let n_sustained = (rate * (1.0 + noise)).round().max(0.0) as u32;
            let n_momentary = (0.6 * rate * (1.0 + rng.random_range(-0.3..0.3))).round().max(0.0) as u32;
            ReliabilityRecord {
                date: start + Duration::days(d as i64),
                n_sustained,
                n_momentary,
                temperature: Some(round(temperature, 2)),
                wind: Some(round(wind, 2)),
                precipitation: Some(round(precipitation, 2)),
                pressure: Some(round(pressure, 2)),
                lightning: Some(lightning),
            }
        })
        .collect()
}
