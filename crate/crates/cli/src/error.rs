use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

/// One offending scenario key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfigIssue {
    pub key: String,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {message}")]
    Config {
        path: Option<PathBuf>,
        message: String,
        issues: Vec<ConfigIssue>,
    },
    #[error("{analysis} analysis failed: {message}")]
    Runtime { analysis: String, message: String },
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'static str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    analysis: Option<&'a str>,
    #[serde(skip_serializing_if = "<[_]>::is_empty")]
    issues: &'a [ConfigIssue],
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Runtime { .. } => 1,
        }
    }

    pub fn runtime(analysis: &str, err: anyhow::Error) -> Self {
        CliError::Runtime {
            analysis: analysis.to_string(),
            message: format!("{err:#}"),
        }
    }

    /// Machine-readable form written to stderr.
    pub fn to_json(&self) -> String {
        let report = match self {
            CliError::Config { path, message, issues } => ErrorReport {
                error: "config",
                message: message.clone(),
                // a single missing input file is the path worth naming
                path: missing_file(issues).or_else(|| path.as_ref().map(|p| p.display().to_string())),
                analysis: None,
                issues,
            },
            CliError::Runtime { analysis, message } => ErrorReport {
                error: "runtime",
                message: message.clone(),
                path: None,
                analysis: Some(analysis),
                issues: &[],
            },
        };
        serde_json::to_string(&report).expect("error report serializes")
    }
}

fn missing_file(issues: &[ConfigIssue]) -> Option<String> {
    let mut files = issues.iter().filter_map(|i| i.message.strip_prefix("file not found: "));
    let first = files.next()?;
    files.next().is_none().then(|| first.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_errors_name_the_missing_path() {
        let e = CliError::Config {
            path: None,
            message: "invalid scenario".into(),
            issues: vec![ConfigIssue {
                key: "feeder.model".into(),
                message: "file not found: /x/feeder.json".into(),
            }],
        };
        assert_eq!(e.exit_code(), 2);
        let v: serde_json::Value = serde_json::from_str(&e.to_json()).unwrap();
        assert_eq!(v["path"], "/x/feeder.json");
        assert_eq!(v["issues"][0]["key"], "feeder.model");
    }

    #[test]
    fn runtime_errors_exit_one() {
        let e = CliError::runtime("feeder", anyhow::anyhow!("diverged"));
        assert_eq!(e.exit_code(), 1);
        let v: serde_json::Value = serde_json::from_str(&e.to_json()).unwrap();
        assert_eq!(v["error"], "runtime");
        assert_eq!(v["analysis"], "feeder");
    }
}
