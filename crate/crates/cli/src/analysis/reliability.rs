use anyhow::{Context, Result};
use serde::Serialize;
use umbra_core::ingest::parse_records;
use umbra_core::reliability::*;

use crate::config::{ReliabilityConfig, ScenarioConfig};
use crate::output::{Axis, OutDir, PlotData, PlotSeries};

#[derive(Debug, Serialize)]
struct RegressionSummary {
    parameter: &'static str,
    kind: RegressionKind,
    coefficients: Vec<f64>,
    r_squared: f64,
}

#[derive(Debug, Serialize)]
struct Report<'a> {
    records: usize,
    skipped: usize,
    target: Target,
    seed: u64,
    metrics: &'a TrainMetrics,
    /// Test MSE over the variance of the test targets.
    relative_test_mse: Option<f64>,
    regressions: Vec<RegressionSummary>,
    sensitivity_ranking: Vec<(String, f64)>,
    input_sensitivity: Vec<(&'static str, f64)>,
}

pub fn run(scenario: &ScenarioConfig, cfg: &ReliabilityConfig, seed: u64, out: &OutDir) -> Result<()> {
    let path = scenario.resolve(&cfg.records);
    let records = parse_records(&path).with_context(|| format!("reading {}", path.display()))?;
    let train = TrainConfig {
        seed,
        ..cfg.train.clone()
    };
    let fit = fit_forecaster(&records, &train)?;
    let m = &fit.metrics;

    let regressions = WEATHER
        .iter()
        .zip(&fit.forecaster.regressions.models)
        .map(|(p, r)| RegressionSummary {
            parameter: p,
            kind: r.kind,
            coefficients: r.coefficients.clone(),
            r_squared: r.r_squared,
        })
        .collect();
    out.json(
        "metrics.json",
        &Report {
            records: records.len(),
            skipped: fit.features.skipped.len(),
            target: train.target,
            seed,
            metrics: m,
            relative_test_mse: m.test_mse.zip(m.test_target_variance).map(|(a, v)| a / v),
            regressions,
            sensitivity_ranking: fit.sensitivity.ranking(),
            input_sensitivity: FEATURE_NAMES
                .iter()
                .copied()
                .zip(fit.sensitivity.per_input.iter().copied())
                .collect(),
        },
    )?;
    let mut model = fit.forecaster.to_json();
    model.push('\n');
    std::fs::write(out.path("forecaster.json"), model)?;

    let (t1, t2) = train.split_points(fit.features.len());
    let split = |i: usize| {
        if i < t1 {
            "train"
        } else if i < t2 {
            "validation"
        } else {
            "test"
        }
    };
    let mut predicted = Vec::with_capacity(fit.features.len());
    for row in &fit.features.rows {
        predicted.push(fit.forecaster.mlp.predict_count(row)?);
    }
    out.csv(
        "predictions.csv",
        &["date", "split", "target", "predicted"],
        (0..fit.features.len()).map(|i| {
            vec![
                fit.features.dates[i].to_string(),
                split(i).to_string(),
                fit.features.targets[i].to_string(),
                predicted[i].to_string(),
            ]
        }),
    )?;

    let dates = Axis::Label(fit.test_pairs.iter().map(|(d, _, _)| d.to_string()).collect());
    out.plot(&PlotData {
        name: "predicted_vs_actual".into(),
        title: "Daily interruptions on held-out days".into(),
        x_label: "date".into(),
        y_label: "interruptions".into(),
        series: vec![
            PlotSeries {
                name: "target".into(),
                x: dates.clone(),
                y: fit.test_pairs.iter().map(|p| Some(p.1)).collect(),
            },
            PlotSeries {
                name: "predicted".into(),
                x: dates,
                y: fit.test_pairs.iter().map(|p| Some(p.2)).collect(),
            },
        ],
    })
}
