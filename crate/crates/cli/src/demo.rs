//! Self-contained demo inputs: two PV plants, a power-quality meter, the
//! twelve-bus feeder and three years of reliability records, all synthetic
//! and seeded.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use anyhow::{Context, Result};
use umbra_core::demo;
use umbra_core::feeder::FeederModel;
use umbra_core::ingest::{write_records, write_table};
use umbra_core::AlignedSeries;

use crate::output::timestamp;

pub const RELIABILITY_DAYS: usize = 1096;

fn table(path: &Path, series: &[&AlignedSeries]) -> Result<()> {
    let f = File::create(path).with_context(|| format!("writing {}", path.display()))?;
    write_table(BufWriter::new(f), series)?;
    Ok(())
}

/// Writes the demo bundle into `dir`, creating it if needed.
pub fn write_bundle(dir: &Path, seed: u64) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    // plant B saw deeper coverage than plant A
    for (name, spec, coverage, offset) in [
        ("pv_system_a.csv", demo::pv_system_a(), 1.0, 0),
        ("pv_system_b.csv", demo::pv_system_b(), 1.25, 1),
    ] {
        let ch = demo::pv_channels(&spec, coverage, seed + offset);
        table(
            &dir.join(name),
            &[
                &ch.irradiance,
                &ch.module_temperature,
                &ch.ambient_temperature,
                &ch.power,
            ],
        )?;
    }

    let m = demo::meter_channels(seed + 2);
    let meter: Vec<&AlignedSeries> = (0..3)
        .flat_map(|p| [&m.voltage[p], &m.voltage_thd[p], &m.current_thd[p], &m.current[p]])
        .collect();
    table(&dir.join("meter.csv"), &meter)?;

    let model = FeederModel::new(demo::feeder_spec())?;
    fs::write(dir.join("feeder.json"), model.to_json() + "\n")?;
    let profiles = demo::feeder_profiles();
    table(&dir.join("feeder_profiles.csv"), &profiles.values().collect::<Vec<_>>())?;

    let records = demo::reliability_records(RELIABILITY_DAYS, seed + 3);
    let f = File::create(dir.join("reliability.csv"))?;
    write_records(BufWriter::new(f), &records)?;

    fs::write(dir.join("scenario.toml"), scenario_toml())?;
    Ok(())
}

fn pv_system(key: &str, spec: umbra_core::perf::PvSystemSpec) -> String {
    format!(
        r#"
[[perf.systems]]
data = "pv_{key}.csv"
spec = {{ name = "{key}", p_dc = {}, p_dirt = {}, p_mismatch = {}, p_cable = {}, p_inverter = {}, temp_coeff_pct = {} }}
"#,
        spec.p_dc, spec.p_dirt, spec.p_mismatch, spec.p_cable, spec.p_inverter, spec.temp_coeff_pct
    )
}

pub fn scenario_toml() -> String {
    let eclipse = demo::eclipse_window();
    let day = demo::day_window();
    let window = |w: &umbra_core::ingest::TimeWindow| {
        format!(
            "{{ start = \"{}\", end = \"{}\" }}",
            timestamp(w.start),
            timestamp(w.end)
        )
    };
    let snapshots: String = [("pre", 13, 15), ("peak", 14, 45), ("post", 16, 10)]
        .iter()
        .map(|(label, h, m)| {
            format!(
                "  {{ label = \"{label}\", at = \"{}\" }},\n",
                timestamp(demo::local(*h, *m))
            )
        })
        .collect();
    let mut s = format!(
        r#"# Demo scenario: solar eclipse of 2017-08-21, local time UTC-4.
analysis = "all"
output_dir = "out"
seed = 42

[perf]
window = {eclipse}
mode = "to_stc"
"#,
        eclipse = window(&eclipse)
    );
    s += &pv_system("system_a", demo::pv_system_a());
    s += &pv_system("system_b", demo::pv_system_b());
    s += &format!(
        r#"
[quality]
data = "meter.csv"
resolution_s = 1
nominal_voltage = 277.0
snapshots = [
{snapshots}]

[feeder]
model = "feeder.json"
profiles = "feeder_profiles.csv"
window = {day}
ramp_window = {eclipse}
snapshots = [
{snapshots}]

[reliability]
records = "reliability.csv"

[reliability.train]
max_epochs = 3000
patience = 300
"#,
        day = window(&day),
        eclipse = window(&eclipse),
    );
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Analysis, ScenarioConfig};

    #[test]
    fn bundle_validates() {
        let dir = tempfile::tempdir().unwrap();
        write_bundle(dir.path(), 42).unwrap();
        let cfg = ScenarioConfig::load(&dir.path().join("scenario.toml")).unwrap();
        assert_eq!(cfg.validate(&Analysis::All.expand()), []);
        assert_eq!(cfg.perf.unwrap().systems[0].spec.name, "system_a");
    }
}
