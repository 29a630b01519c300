//! Result files and the manifest tying them to their inputs.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

pub struct OutputDir {
    dir: PathBuf,
    written: BTreeMap<String, String>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(OutputDir { dir: dir.to_path_buf(), written: BTreeMap::new() })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.written.insert(name.to_string(), hex::encode(Sha256::digest(bytes)));
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn write_jsonl<T: Serialize>(&mut self, name: &str, values: &[T]) -> Result<PathBuf> {
        let mut text = String::new();
        for v in values {
            text += &serde_json::to_string(v)?;
            text.push('\n');
        }
        self.write(name, text.as_bytes())
    }

    pub fn write_csv(&mut self, name: &str, table: &Csv) -> Result<PathBuf> {
        self.write(name, table.text.as_bytes())
    }

    /// Write `manifest.json` and `config.json`. The latter can be passed back
    /// through `--config` to reproduce the run.
    pub fn finish(mut self, command: &str, cfg: &ExperimentConfig) -> Result<()> {
        self.write_json("config.json", cfg)?;
        let manifest = Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            seed: cfg.seed,
            inputs_sha256: inputs_hash(cfg)?,
            config: cfg,
            outputs: &self.written,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    inputs_sha256: String,
    config: &'a ExperimentConfig,
    outputs: &'a BTreeMap<String, String>,
}

/// Hash of the effective config followed by every input file's content.
pub fn inputs_hash(cfg: &ExperimentConfig) -> Result<String> {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(cfg)?);
    for path in cfg.input_files() {
        let bytes = std::fs::read(&path).with_context(|| format!("reading input {}", path.display()))?;
        h.update(path.to_string_lossy().as_bytes());
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex::encode(h.finalize()))
}

/// Minimal CSV builder; fields are numbers or plain identifiers.
pub struct Csv {
    text: String,
    width: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv { text: header.join(",") + "\n", width: header.len() }
    }

    pub fn row(&mut self, fields: &[&dyn Display]) {
        debug_assert_eq!(fields.len(), self.width);
        let cells: Vec<String> = fields.iter().map(|f| compact(f.to_string())).collect();
        self.text += &cells.join(",");
        self.text.push('\n');
    }
}

/// Exponent notation for numbers that print as long runs of zeros.
fn compact(cell: String) -> String {
    match cell.parse::<f64>() {
        Ok(x) if x != 0.0 && (x.abs() < 1e-4 || x.abs() >= 1e16) => format!("{x:e}"),
        _ => cell,
    }
}

/// Empty cell for missing values.
pub fn opt<T: Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
