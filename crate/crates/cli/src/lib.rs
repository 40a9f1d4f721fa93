//! Batch front end: runs the analyses a scenario file selects and writes
//! their artifacts plus a manifest below one output directory.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod demo;
pub mod error;
pub mod output;

use std::path::{Path, PathBuf};

use config::{Analysis, ScenarioConfig};
use error::CliError;
use output::OutDir;

/// Seed used when neither the command line nor the scenario sets one.
pub const DEFAULT_SEED: u64 = 42;

/// Command-line overrides; `None` defers to the scenario file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub config: PathBuf,
    pub analysis: Option<Analysis>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// What a successful run produced.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub out: PathBuf,
    pub analyses: Vec<Analysis>,
    pub seed: u64,
}

pub fn run(opts: &RunOptions) -> Result<RunReport, CliError> {
    let scenario = ScenarioConfig::load(&opts.config)?;
    let selected = opts.analysis.unwrap_or(scenario.analysis).expand();
    let issues = scenario.validate(&selected);
    if !issues.is_empty() {
        return Err(CliError::Config {
            path: Some(opts.config.clone()),
            message: format!("{} problem(s) in scenario", issues.len()),
            issues,
        });
    }
    let seed = opts.seed.or(scenario.seed).unwrap_or(DEFAULT_SEED);
    let out = match (&opts.out, &scenario.output_dir) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => scenario.resolve(o),
        (None, None) => PathBuf::from("out"),
    };
    std::fs::create_dir_all(&out).map_err(|e| CliError::Config {
        path: Some(out.clone()),
        message: format!("cannot create output directory: {e}"),
        issues: Vec::new(),
    })?;

    let results: Vec<(Analysis, anyhow::Result<()>)> = std::thread::scope(|s| {
        let handles: Vec<_> = selected
            .iter()
            .map(|&a| {
                let (scenario, out) = (&scenario, &out);
                (a, s.spawn(move || run_one(scenario, a, seed, out)))
            })
            .collect();
        handles
            .into_iter()
            .map(|(a, h)| {
                (
                    a,
                    h.join().unwrap_or_else(|_| Err(anyhow::anyhow!("analysis panicked"))),
                )
            })
            .collect()
    });
    for (a, r) in results {
        r.map_err(|e| CliError::runtime(a.name(), e))?;
    }

    let config_sha = output::sha256_file(&opts.config).map_err(|e| CliError::runtime("manifest", e))?;
    output::write_manifest(&out, seed, selected.iter().map(|a| a.name()).collect(), config_sha)
        .map_err(|e| CliError::runtime("manifest", e))?;
    Ok(RunReport {
        out,
        analyses: selected,
        seed,
    })
}

fn run_one(scenario: &ScenarioConfig, a: Analysis, seed: u64, root: &Path) -> anyhow::Result<()> {
    log::info!("running {}", a.name());
    let dir = OutDir::fresh(root.join(a.name()))?;
    // validation guarantees the section is present
    let missing = || anyhow::anyhow!("{} section missing", a.name());
    match a {
        Analysis::Perf => analysis::perf::run(scenario, scenario.perf.as_ref().ok_or_else(missing)?, &dir),
        Analysis::Quality => analysis::quality::run(scenario, scenario.quality.as_ref().ok_or_else(missing)?, &dir),
        Analysis::Feeder => analysis::feeder::run(scenario, scenario.feeder.as_ref().ok_or_else(missing)?, &dir),
        Analysis::Reliability => {
            analysis::reliability::run(scenario, scenario.reliability.as_ref().ok_or_else(missing)?, seed, &dir)
        }
        Analysis::All => unreachable!("expanded before dispatch"),
    }?;
    log::info!("{} done", a.name());
    Ok(())
}
