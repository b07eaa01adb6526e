//! Trajectory CSV files and JSON run manifests. Every file carries the hash
//! of the configuration that produced it.

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::invariance::CoordinateSummary;
use crate::solver::{PathOutput, TruncationDiagnostics};

pub const MANIFEST: &str = "manifest.json";

/// Shortest round-trip representation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_csv_header<W: Write>(w: &mut W, config_hash: &str, seed: u64, dim: usize) -> io::Result<()> {
    writeln!(w, "# config_hash={config_hash} seed={seed}")?;
    write!(w, "path,t")?;
    for k in 0..dim {
        write!(w, ",x{k}")?;
    }
    writeln!(w)
}

/// Rows `path,t,x0,..` for every `every`-th step and the final step.
pub fn write_path_rows<W: Write>(w: &mut W, path: &PathOutput, every: usize) -> io::Result<()> {
    let steps = path.steps();
    let mut line = String::new();
    for n in (0..=steps).filter(|n| n % every == 0 || *n == steps) {
        line.clear();
        line.push_str(&path.path.to_string());
        line.push(',');
        line.push_str(&fmt_f64(path.time(n)));
        for v in path.at(n) {
            line.push(',');
            line.push_str(&fmt_f64(*v));
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    Ok(())
}

/// Rows `path,t,x0,..` of terminal values.
pub fn write_point_row<W: Write>(w: &mut W, path: u64, t: f64, x: &[f64]) -> io::Result<()> {
    let mut line = format!("{path},{}", fmt_f64(t));
    for v in x {
        line.push(',');
        line.push_str(&fmt_f64(*v));
    }
    line.push('\n');
    w.write_all(line.as_bytes())
}

/// Config hash recorded in the first line of a CSV file.
pub fn csv_config_hash(path: &Path) -> Result<String> {
    let f = fs::File::open(path)?;
    let mut first = String::new();
    io::BufReader::new(f).read_line(&mut first)?;
    first
        .trim()
        .strip_prefix("# config_hash=")
        .and_then(|rest| rest.split_whitespace().next())
        .map(str::to_string)
        .ok_or_else(|| Error::ReplayMismatch(format!("{} has no config hash header", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
}

impl FileEntry {
    pub fn of(dir: &Path, name: &str) -> Result<FileEntry> {
        let bytes = fs::read(dir.join(name))?;
        Ok(FileEntry {
            name: name.to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub paths: usize,
    pub horizon: f64,
    pub dt: f64,
    pub steps: usize,
    pub truncation: TruncationDiagnostics,
    pub diverged: usize,
    pub diverged_paths: Vec<u64>,
    pub terminal_summary: Vec<CoordinateSummary>,
    pub files: Vec<FileEntry>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<Option<Manifest>> {
    let path = dir.join(MANIFEST);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path)?;
    Ok(Some(serde_json::from_str(&text)?))
}

/// Fails when `dir` holds outputs of a different configuration: the manifest,
/// any CSV header and any JSON report carrying a `config_hash` are checked.
pub fn check_replay(dir: &Path, config_hash: &str) -> Result<()> {
    if !dir.exists() {
        return Ok(());
    }
    let mismatch = |name: &str, found: &str| {
        Err(Error::ReplayMismatch(format!(
            "{} in {} was produced by config {found} but the current config hashes to {config_hash}",
            name,
            dir.display()
        )))
    };
    let mut names: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_file())
        .collect();
    names.sort();
    for path in names {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let found = match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => Some(csv_config_hash(&path)?),
            Some("json") => {
                let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path)?)?;
                v.get("config_hash").and_then(|h| h.as_str()).map(str::to_string)
            }
            _ => None,
        };
        if let Some(found) = found {
            if found != config_hash {
                return mismatch(&name, &found);
            }
        }
    }
    Ok(())
}

/// Checks every file listed in the manifest against its recorded digest and
/// every CSV against the manifest's config hash.
pub fn verify_outputs(dir: &Path) -> Result<Manifest> {
    let m = read_manifest(dir)?.ok_or_else(|| Error::ReplayMismatch(format!("no manifest in {}", dir.display())))?;
    for f in &m.files {
        let now = FileEntry::of(dir, &f.name)?;
        if now.sha256 != f.sha256 {
            return Err(Error::ReplayMismatch(format!("{} changed since the run", f.name)));
        }
        if f.name.ends_with(".csv") && csv_config_hash(&dir.join(&f.name))? != m.config_hash {
            return Err(Error::ReplayMismatch(format!("{} carries a different config hash", f.name)));
        }
    }
    Ok(m)
}
