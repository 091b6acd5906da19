//! CSV field dumps and JSON reports, each tagged with the config hash.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use fracblow_core::FieldOnGrid;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

const HASH_TAG: &str = "# config_hash: ";

/// Header shared by every artifact of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub command: String,
    pub version: String,
    pub config_hash: String,
}

impl Metadata {
    pub fn new(command: &str, config_hash: &str) -> Self {
        Self { command: command.into(), version: VERSION.into(), config_hash: config_hash.into() }
    }
}

/// JSON report layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report<T> {
    pub metadata: Metadata,
    pub wall_seconds: f64,
    pub result: T,
}

/// One row of a field dump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldRow {
    pub rho: f64,
    pub theta: f64,
    pub value: f64,
    pub normalized_value: f64,
}

/// Rows for every node of `field`, center last.
pub fn field_rows(field: &FieldOnGrid) -> Vec<FieldRow> {
    let grid = field.grid();
    (0..grid.node_count())
        .map(|i| {
            let x = grid.node(i);
            let normalized_value = field.value(i);
            FieldRow {
                rho: x.rho(),
                theta: if x.radius() == 0.0 { 0.0 } else { x.theta() },
                value: normalized_value * x.rho().powf(-field.exponent()),
                normalized_value,
            }
        })
        .collect()
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

/// Writes `rows` after comment lines carrying the metadata. The output does
/// not depend on timing, so identical configs give identical files.
pub fn write_csv<R: Serialize>(dir: &Path, name: &str, meta: &Metadata, rows: &[R]) -> Result<PathBuf> {
    ensure_dir(dir)?;
    let path = dir.join(format!("{name}.csv"));
    let mut file = fs::File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
    writeln!(file, "# fracblow {} {}", meta.version, meta.command)?;
    writeln!(file, "{HASH_TAG}{}", meta.config_hash)?;
    let mut w = csv::Writer::from_writer(file);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(path)
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, report: &Report<T>) -> Result<PathBuf> {
    ensure_dir(dir)?;
    let path = dir.join(format!("{name}.json"));
    let text = serde_json::to_string_pretty(report)?;
    fs::write(&path, text + "\n").with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}

/// Reads rows from a CSV written by [`write_csv`].
pub fn read_csv<R: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<R>> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    r.deserialize().map(|row| row.map_err(Into::into)).collect()
}

/// Config hash embedded in a CSV or JSON artifact.
pub fn artifact_hash(path: &Path) -> Result<String> {
    let is_json = path.extension().is_some_and(|e| e == "json");
    if is_json {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let v: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("{} is not JSON", path.display()))?;
        match v.pointer("/metadata/config_hash").and_then(|h| h.as_str()) {
            Some(h) => Ok(h.to_string()),
            None => bail!("{} has no config hash", path.display()),
        }
    } else {
        let file = fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
        for line in BufReader::new(file).lines() {
            let line = line?;
            if let Some(h) = line.strip_prefix(HASH_TAG) {
                return Ok(h.trim().to_string());
            }
            if !line.starts_with('#') {
                break;
            }
        }
        bail!("{} has no config hash", path.display())
    }
}
