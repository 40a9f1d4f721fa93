use anyhow::{Context, Result};
use serde::Serialize;
use umbra_core::ingest::{bivariate_report, parse_table, ColumnSpec, TableSchema};
use umbra_core::perf::*;
use umbra_core::{AlignedSeries, Unit};

use crate::config::{PerfConfig, PvSystemConfig, ScenarioConfig};
use crate::output::{OutDir, PlotData, PlotSeries};

#[derive(Debug, Serialize)]
struct EnergyReport {
    estimated_kwh: f64,
    coverage: f64,
    actual_kwh: f64,
    performance_ratio: Option<f64>,
}

#[derive(Debug, Serialize)]
struct SystemReport {
    name: String,
    p_dc_kw: f64,
    derate: f64,
    mode: CorrectionMode,
    t_cell_avg: Option<f64>,
    /// Samples with a defined PPI.
    ppi_defined: usize,
    summary: EclipseSummary,
    energy: EnergyReport,
}

#[derive(Debug, Serialize)]
struct Report {
    window: umbra_core::ingest::TimeWindow,
    min_estimate_kw: f64,
    systems: Vec<SystemReport>,
}

pub struct Channels {
    pub irradiance: AlignedSeries,
    pub module_temp: AlignedSeries,
    pub ambient_temp: AlignedSeries,
    pub power: AlignedSeries,
}

pub fn load_channels(scenario: &ScenarioConfig, sys: &PvSystemConfig) -> Result<Channels> {
    let temp = |c: &str| ColumnSpec {
        fahrenheit: sys.fahrenheit,
        ..ColumnSpec::new(c, Unit::Celsius)
    };
    let schema = TableSchema {
        utc_offset_minutes: sys.utc_offset_minutes,
        ..TableSchema::new(
            sys.resolution_s,
            vec![
                ColumnSpec::new("irradiance", Unit::WattPerSquareMeter),
                temp("module_temp"),
                temp("ambient_temp"),
                ColumnSpec::new("power", Unit::Kilowatt),
            ],
        )
    };
    let path = scenario.resolve(&sys.data);
    let mut table = parse_table(&path, &schema).with_context(|| format!("reading {}", path.display()))?;
    if !table.rejected.is_empty() {
        log::warn!(
            "{}: {} unparseable cells kept as missing",
            path.display(),
            table.rejected.len()
        );
    }
    let mut take = |n: &str| {
        table
            .take(n)
            .with_context(|| format!("{}: column {n} missing", path.display()))
    };
    Ok(Channels {
        irradiance: take("irradiance")?,
        module_temp: take("module_temp")?,
        ambient_temp: take("ambient_temp")?,
        power: take("power")?,
    })
}

pub fn run(scenario: &ScenarioConfig, cfg: &PerfConfig, out: &OutDir) -> Result<()> {
    let window = cfg.window.window();
    let mut systems = Vec::new();
    for sys in &cfg.systems {
        let ch = load_channels(scenario, sys)?;
        let spec = sys.spec.clone().with_cell_average_from(&ch.module_temp);
        let name = spec.name.clone();
        let temps = cfg.mode.needs_temperature().then_some(&ch.module_temp);
        let estimate = estimate_power_series(&spec, &ch.irradiance, temps, cfg.mode, "estimate")?;
        let ppi = ppi_series(&ch.power, &estimate, cfg.min_estimate_kw, "ppi")?;
        let summary = eclipse_summary(
            &[
                ch.power.clone(),
                ch.irradiance.clone(),
                ch.ambient_temp.clone(),
                ch.module_temp.clone(),
                ppi.clone(),
            ],
            window,
        )
        .with_context(|| format!("{name}: eclipse summary"))?;
        let energy = estimate_energy(&spec, &ch.irradiance, temps, cfg.mode)?;
        let hours = ch.power.resolution_s() as f64 / 3600.0;
        let actual_kwh = ch.power.present().map(|(_, p)| p).sum::<f64>() * hours;
        let correlation = bivariate_report(&[
            ch.power.clone(),
            ch.irradiance.clone(),
            ch.ambient_temp.clone(),
            ch.module_temp.clone(),
        ])?;

        out.series_csv(
            &format!("{name}_timeseries.csv"),
            &[&ch.power.clone().renamed("actual"), &estimate, &ppi],
        )?;
        out.json(&format!("correlation_{name}.json"), &correlation)?;
        out.plot(&PlotData {
            name: format!("ppi_{name}"),
            title: format!("Power performance index, {name}"),
            x_label: "time (UTC)".into(),
            y_label: "PPI".into(),
            series: vec![PlotSeries::from_series(format!("ppi_{name}"), &ppi)],
        })?;
        out.plot(&PlotData {
            name: format!("power_{name}"),
            title: format!("Measured and expected power, {name}"),
            x_label: "time (UTC)".into(),
            y_label: "kW".into(),
            series: vec![
                PlotSeries::from_series("actual", &ch.power),
                PlotSeries::from_series("estimate", &estimate),
            ],
        })?;
        systems.push(SystemReport {
            p_dc_kw: spec.p_dc,
            derate: derate(&spec),
            mode: cfg.mode,
            t_cell_avg: spec.t_cell_avg,
            ppi_defined: ppi.present_count(),
            summary,
            energy: EnergyReport {
                estimated_kwh: energy.kwh,
                coverage: energy.coverage,
                actual_kwh,
                performance_ratio: performance_ratio(actual_kwh, &spec, &ch.irradiance).ok(),
            },
            name,
        });
    }
    out.json(
        "eclipse_summary.json",
        &Report {
            window,
            min_estimate_kw: cfg.min_estimate_kw,
            systems,
        },
    )
}
