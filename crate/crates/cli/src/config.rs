//! Scenario files: one TOML document describing which analyses to run and
//! where their inputs live. Relative paths resolve against the file's
//! directory.

use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use umbra_core::ingest::TimeWindow;
use umbra_core::perf::{CorrectionMode, PvSystemSpec};
use umbra_core::quality::ComplianceLimits;
use umbra_core::reliability::TrainConfig;

use crate::error::{CliError, ConfigIssue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    Perf,
    Quality,
    Feeder,
    Reliability,
    All,
}

impl Analysis {
    pub const EACH: [Analysis; 4] = [
        Analysis::Perf,
        Analysis::Quality,
        Analysis::Feeder,
        Analysis::Reliability,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Analysis::Perf => "perf",
            Analysis::Quality => "quality",
            Analysis::Feeder => "feeder",
            Analysis::Reliability => "reliability",
            Analysis::All => "all",
        }
    }

    pub fn expand(self) -> Vec<Analysis> {
        match self {
            Analysis::All => Self::EACH.to_vec(),
            a => vec![a],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
}

impl WindowConfig {
    pub fn window(&self) -> TimeWindow {
        TimeWindow::new(self.start, self.end).expect("validated window")
    }
}

/// Labelled instant for snapshot reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Snapshot {
    pub label: String,
    pub at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PvSystemConfig {
    pub spec: PvSystemSpec,
    /// CSV with `timestamp`, `irradiance`, `module_temp`, `ambient_temp` and
    /// `power` columns.
    pub data: PathBuf,
    #[serde(default = "minute")]
    pub resolution_s: u32,
    #[serde(default)]
    pub utc_offset_minutes: i32,
    /// Temperature columns are in °F.
    #[serde(default)]
    pub fahrenheit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerfConfig {
    /// Event window for the drop statistics.
    pub window: WindowConfig,
    #[serde(default)]
    pub mode: CorrectionMode,
    /// Estimates at or below this are too small for a meaningful PPI, kW.
    #[serde(default = "one")]
    pub min_estimate_kw: f64,
    pub systems: Vec<PvSystemConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QualityConfig {
    /// CSV with per-phase `v_*`, `vthd_*`, `ithd_*` and `i_*` columns.
    pub data: PathBuf,
    #[serde(default = "second")]
    pub resolution_s: u32,
    /// Voltage base for flicker levels, V.
    pub nominal_voltage: f64,
    #[serde(default)]
    pub limits: ComplianceLimits,
    /// Averaging window of the maximum demand current, s.
    #[serde(default = "quarter_hour")]
    pub demand_window_s: u32,
    #[serde(default = "ten_minutes")]
    pub flicker_window_s: u32,
    #[serde(default)]
    pub snapshots: Vec<Snapshot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeederConfig {
    /// Feeder description, JSON.
    pub model: PathBuf,
    /// CSV with one column per profile named in the model.
    pub profiles: PathBuf,
    #[serde(default = "minute")]
    pub resolution_s: u32,
    pub window: WindowConfig,
    /// Interval for the tap-count summary; the whole run when absent.
    #[serde(default)]
    pub ramp_window: Option<WindowConfig>,
    /// Instants whose voltage profiles and losses are reported.
    #[serde(default)]
    pub snapshots: Vec<Snapshot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReliabilityConfig {
    pub records: PathBuf,
    #[serde(default)]
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "all")]
    pub analysis: Analysis,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub perf: Option<PerfConfig>,
    #[serde(default)]
    pub quality: Option<QualityConfig>,
    #[serde(default)]
    pub feeder: Option<FeederConfig>,
    #[serde(default)]
    pub reliability: Option<ReliabilityConfig>,
    /// Directory relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn all() -> Analysis {
    Analysis::All
}
fn one() -> f64 {
    1.0
}
fn second() -> u32 {
    1
}
fn minute() -> u32 {
    60
}
fn ten_minutes() -> u32 {
    600
}
fn quarter_hour() -> u32 {
    900
}

impl ScenarioConfig {
    /// Reads and parses `path` without checking references.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
            path: Some(path.to_path_buf()),
            message: format!("cannot read scenario: {e}"),
            issues: Vec::new(),
        })?;
        let mut cfg = Self::parse(&text).map_err(|issue| CliError::Config {
            path: Some(path.to_path_buf()),
            message: "scenario does not match the schema".into(),
            issues: vec![issue],
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigIssue> {
        toml::from_str(text).map_err(|e| {
            let key = e
                .span()
                .map(|s| {
                    let line = text[..s.start].matches('\n').count() + 1;
                    let snippet = text[s.clone()].lines().next().unwrap_or("").trim().to_string();
                    format!("line {line}: {snippet}")
                })
                .unwrap_or_default();
            ConfigIssue {
                key,
                message: e.message().to_string(),
            }
        })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Checks every analysis in `selected`: its section exists, windows are
    /// ordered, numbers are in range and referenced files exist. All problems
    /// are reported together.
    pub fn validate(&self, selected: &[Analysis]) -> Vec<ConfigIssue> {
        let mut issues = Vec::new();
        let mut push = |key: String, message: String| issues.push(ConfigIssue { key, message });
        let window = |key: &str, w: &WindowConfig, push: &mut dyn FnMut(String, String)| {
            if w.start >= w.end {
                push(key.into(), format!("start {} must precede end {}", w.start, w.end));
            }
        };
        let file = |key: String, p: &Path, push: &mut dyn FnMut(String, String)| {
            let full = self.resolve(p);
            if !full.is_file() {
                push(key, format!("file not found: {}", full.display()));
            }
        };
        for a in selected {
            match a {
                Analysis::Perf => match &self.perf {
                    None => push("perf".into(), "section missing".into()),
                    Some(c) => {
                        window("perf.window", &c.window, &mut push);
                        if c.systems.is_empty() {
                            push("perf.systems".into(), "at least one system is required".into());
                        }
                        if !(c.min_estimate_kw >= 0.0) {
                            push("perf.min_estimate_kw".into(), "must be non-negative".into());
                        }
                        for (i, s) in c.systems.iter().enumerate() {
                            if let Err(e) = s.spec.validate() {
                                push(format!("perf.systems[{i}].spec"), e.to_string());
                            }
                            if s.resolution_s != 60 {
                                push(
                                    format!("perf.systems[{i}].resolution_s"),
                                    "energy estimates need 60 s data".into(),
                                );
                            }
                            file(format!("perf.systems[{i}].data"), &s.data, &mut push);
                        }
                    }
                },
                Analysis::Quality => match &self.quality {
                    None => push("quality".into(), "section missing".into()),
                    Some(c) => {
                        if !(c.nominal_voltage > 0.0) {
                            push("quality.nominal_voltage".into(), "must be positive".into());
                        }
                        if let Err(e) = c.limits.validate() {
                            push("quality.limits".into(), e.to_string());
                        }
                        for (key, v) in [
                            ("quality.resolution_s", c.resolution_s),
                            ("quality.demand_window_s", c.demand_window_s),
                            ("quality.flicker_window_s", c.flicker_window_s),
                        ] {
                            if v == 0 || v % c.resolution_s.max(1) != 0 {
                                push(key.into(), "must be a positive multiple of the data resolution".into());
                            }
                        }
                        file("quality.data".into(), &c.data, &mut push);
                    }
                },
                Analysis::Feeder => match &self.feeder {
                    None => push("feeder".into(), "section missing".into()),
                    Some(c) => {
                        window("feeder.window", &c.window, &mut push);
                        if let Some(r) = &c.ramp_window {
                            window("feeder.ramp_window", r, &mut push);
                        }
                        if c.resolution_s == 0 {
                            push("feeder.resolution_s".into(), "must be positive".into());
                        }
                        file("feeder.model".into(), &c.model, &mut push);
                        file("feeder.profiles".into(), &c.profiles, &mut push);
                    }
                },
                Analysis::Reliability => match &self.reliability {
                    None => push("reliability".into(), "section missing".into()),
                    Some(c) => {
                        if let Err(e) = c.train.validate() {
                            push("reliability.train".into(), e.to_string());
                        }
                        file("reliability.records".into(), &c.records, &mut push);
                    }
                },
                Analysis::All => {}
            }
        }
        issues
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        analysis = "reliability"
        [reliability]
        records = "r.csv"
        train = { hidden = 4 }
    "#;

    #[test]
    fn parses_with_defaults() {
        let c = ScenarioConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.analysis, Analysis::Reliability);
        let r = c.reliability.unwrap();
        assert_eq!(r.train.hidden, 4);
        assert_eq!(r.train.max_epochs, TrainConfig::default().max_epochs);
    }

    #[test]
    fn unknown_keys_are_named() {
        let issue = ScenarioConfig::parse("analysis = \"perf\"\nbogus = 1\n").unwrap_err();
        assert!(issue.message.contains("bogus"), "{issue:?}");
        assert!(issue.key.starts_with("line 2"), "{issue:?}");
    }

    #[test]
    fn validation_lists_every_problem() {
        let text = r#"
            [perf]
            window = { start = "2017-08-21T19:00:00Z", end = "2017-08-21T18:00:00Z" }
            systems = []
            [feeder]
            model = "nope.json"
            profiles = "nope.csv"
            window = { start = "2017-08-21T18:00:00Z", end = "2017-08-21T19:00:00Z" }
        "#;
        let c = ScenarioConfig::parse(text).unwrap();
        let issues = c.validate(&Analysis::All.expand());
        let keys: Vec<&str> = issues.iter().map(|i| i.key.as_str()).collect();
        assert_eq!(
            keys,
            [
                "perf.window",
                "perf.systems",
                "quality",
                "feeder.model",
                "feeder.profiles",
                "reliability"
            ]
        );
    }
}
