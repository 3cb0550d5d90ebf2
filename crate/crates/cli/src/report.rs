//! Bit-stable report files.
//!
//! Every run writes a JSON-lines file whose first line is the manifest
//! (command, code version, seed, and the fully resolved config echo) and a
//! CSV where that makes sense. Floats in CSV use fixed scientific notation
//! with 17 significant digits; JSON uses serde's shortest round-trip
//! encoding. Both are deterministic functions of the report, so identical
//! seeds give byte-identical files regardless of worker count.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ResolvedConfig;

/// 17 significant digits: enough to reproduce any f64 exactly.
pub fn sig17(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Serialize)]
pub struct Manifest<'a> {
    pub command: &'a str,
    pub version: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<&'a ResolvedConfig>,
}

pub fn manifest_line(command: &str, seed: Option<u64>, config: Option<&ResolvedConfig>) -> String {
    let m = Manifest { command, version: env!("CARGO_PKG_VERSION"), seed, config };
    serde_json::to_string(&m).expect("manifest serializes")
}

/// Resolves the output directory: `--out` flag, then `SKWAVE_OUT_DIR`,
/// then `runs/`.
pub fn output_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("SKWAVE_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

pub fn write_jsonl(dir: &Path, name: &str, lines: &[String]) -> anyhow::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut text = lines.join("\n");
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

pub fn write_csv<H: AsRef<str>>(
    dir: &Path,
    name: &str,
    header: &[H],
    rows: &[Vec<String>],
) -> anyhow::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(header.iter().map(|h| h.as_ref()))?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(path)
}

pub fn json_line<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("report rows serialize")
}
