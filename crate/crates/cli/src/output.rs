//! Artifact writing: JSON and CSV files, plot-ready series and the manifest.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::{DateTime, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};
use umbra_core::AlignedSeries;

/// Output subdirectory owned by one analysis.
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    /// Creates `root`, removing whatever an earlier run left there.
    pub fn fresh(root: PathBuf) -> Result<Self> {
        if root.exists() {
            fs::remove_dir_all(&root).with_context(|| format!("clearing {}", root.display()))?;
        }
        fs::create_dir_all(&root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self { root })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    fn create(&self, rel: &str) -> Result<PathBuf> {
        let p = self.path(rel);
        if let Some(dir) = p.parent() {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        Ok(p)
    }

    pub fn json<T: Serialize + ?Sized>(&self, rel: &str, value: &T) -> Result<()> {
        let p = self.create(rel)?;
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&p, text).with_context(|| format!("writing {}", p.display()))
    }

    /// Writes a header and rows of already formatted cells.
    pub fn csv(&self, rel: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
        let p = self.create(rel)?;
        let mut w = csv::Writer::from_path(&p).with_context(|| format!("writing {}", p.display()))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Series sharing one grid as a timestamped table.
    pub fn series_csv(&self, rel: &str, series: &[&AlignedSeries]) -> Result<()> {
        let p = self.create(rel)?;
        let file = fs::File::create(&p).with_context(|| format!("writing {}", p.display()))?;
        umbra_core::ingest::write_table(std::io::BufWriter::new(file), series)?;
        Ok(())
    }

    pub fn plot(&self, plot: &PlotData) -> Result<()> {
        self.json(&format!("plots/{}.json", plot.name), plot)
    }
}

pub fn timestamp(t: DateTime<Utc>) -> String {
    t.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

pub fn cell(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// X values of a plotted series.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Axis {
    Time(Vec<DateTime<Utc>>),
    Value(Vec<f64>),
    Label(Vec<String>),
}

#[derive(Debug, Clone, Serialize)]
pub struct PlotSeries {
    pub name: String,
    pub x: Axis,
    pub y: Vec<Option<f64>>,
}

impl PlotSeries {
    pub fn from_series(name: impl Into<String>, s: &AlignedSeries) -> Self {
        Self {
            name: name.into(),
            x: Axis::Time((0..s.len()).map(|i| s.timestamp(i)).collect()),
            y: s.values().to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// One figure's worth of data: labelled axes and one or more series.
#[derive(Debug, Clone, Serialize)]
pub struct PlotData {
    pub name: String,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<PlotSeries>,
}

#[derive(Debug, Serialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Index of every artifact below the output root. Carries no wall-clock
/// time so that identical runs produce identical trees.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub analyses: Vec<&'static str>,
    pub config_sha256: String,
    pub files: Vec<ManifestEntry>,
}

pub const MANIFEST: &str = "manifest.json";

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Files below `root`, relative, sorted, with `/` separators.
pub fn list_files(root: &Path) -> Result<Vec<String>> {
    fn walk(dir: &Path, prefix: &str, out: &mut Vec<String>) -> Result<()> {
        let mut entries: Vec<_> = fs::read_dir(dir)
            .with_context(|| format!("listing {}", dir.display()))?
            .collect::<Result<_, _>>()?;
        entries.sort_by_key(|e| e.file_name());
        for e in entries {
            let name = format!("{prefix}{}", e.file_name().to_string_lossy());
            if e.file_type()?.is_dir() {
                walk(&e.path(), &format!("{name}/"), out)?;
            } else {
                out.push(name);
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(root, "", &mut out)?;
    out.sort();
    Ok(out)
}

pub fn write_manifest(root: &Path, seed: u64, analyses: Vec<&'static str>, config_sha256: String) -> Result<()> {
    let mut files = Vec::new();
    for rel in list_files(root)? {
        if rel == MANIFEST {
            continue;
        }
        let p = root.join(&rel);
        files.push(ManifestEntry {
            bytes: fs::metadata(&p)?.len(),
            sha256: sha256_file(&p)?,
            path: rel,
        });
    }
    let manifest = Manifest {
        tool: "umbra",
        version: env!("CARGO_PKG_VERSION"),
        seed,
        analyses,
        config_sha256,
        files,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(root.join(MANIFEST), text)?;
    Ok(())
}
