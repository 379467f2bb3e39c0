//! Run directories, schema-tagged CSV tables and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::LabError;

/// Bumped whenever a column layout changes.
pub const SCHEMA_VERSION: u32 = 1;

/// Build identifier recorded in manifests.
pub fn build_id() -> String {
    format!("{}-{}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))
}

/// Creates `<out>/<subcmd>-<timestamp>`, adding a numeric suffix instead of
/// reusing an existing directory.
pub fn create_run_dir(out: &Path, subcmd: &str) -> Result<PathBuf, LabError> {
    fs::create_dir_all(out).map_err(|e| LabError::io(out, e))?;
    let stamp = chrono::Local::now().format("%Y%m%dT%H%M%S%.3f").to_string();
    for attempt in 0..1000 {
        let name = if attempt == 0 { format!("{subcmd}-{stamp}") } else { format!("{subcmd}-{stamp}-{attempt}") };
        let dir = out.join(name);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(LabError::io(&dir, e)),
        }
    }
    Err(LabError::Usage(format!("could not find a fresh run directory under {}", out.display())))
}

/// Formats a float so that it round-trips and is stable across runs.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:e}")
    }
}

/// Rows of strings under a named, versioned schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub schema: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(schema: &str, columns: &[&'static str]) -> Self {
        Self { schema: schema.to_string(), columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = format!("# schema: {} v{SCHEMA_VERSION}\n", self.schema).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(&self.columns).expect("in-memory csv");
            for r in &self.rows {
                w.write_record(r).expect("in-memory csv");
            }
            w.flush().expect("in-memory csv");
        }
        buf
    }
}

/// Parses a table written by [`Table::to_bytes`].
pub fn read_table(path: &Path) -> Result<(String, Vec<String>, Vec<Vec<String>>), LabError> {
    let text = fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    let (first, rest) = text.split_once('\n').unwrap_or((&text, ""));
    let schema = first
        .strip_prefix("# schema: ")
        .ok_or_else(|| LabError::Csv { path: path.into(), message: "missing schema header".into() })?
        .to_string();
    let mut rdr = csv::Reader::from_reader(rest.as_bytes());
    let header = rdr
        .headers()
        .map_err(|e| LabError::Csv { path: path.into(), message: e.to_string() })?
        .iter()
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| LabError::Csv { path: path.into(), message: e.to_string() })?;
        rows.push(rec.iter().map(String::from).collect());
    }
    Ok((schema, header, rows))
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputEntry {
    pub file: String,
    pub sha256: String,
    pub rows: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub subcommand: String,
    pub build: String,
    pub seed: u64,
    pub threads: usize,
    pub config_sha256: String,
    pub outputs: Vec<OutputEntry>,
    pub wall_seconds: f64,
    pub stages: Vec<StageTiming>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let d = Sha256::digest(bytes);
    d.iter().map(|b| format!("{b:02x}")).collect()
}

/// Single writer for one run directory.
pub struct RunWriter {
    pub dir: PathBuf,
    subcommand: String,
    config_text: String,
    seed: u64,
    threads: usize,
    outputs: Vec<OutputEntry>,
    stages: Vec<StageTiming>,
    started: Instant,
}

impl RunWriter {
    /// Opens the directory and writes `resolved_config.toml` at once, so no
    /// artifact is ever left without its config.
    pub fn open(dir: PathBuf, subcommand: &str, cfg: &ExperimentConfig, threads: usize) -> Result<Self, LabError> {
        let config_text = cfg.resolved_toml();
        let path = dir.join("resolved_config.toml");
        fs::write(&path, &config_text).map_err(|e| LabError::io(&path, e))?;
        Ok(Self {
            dir,
            subcommand: subcommand.into(),
            config_text,
            seed: cfg.run.seed,
            threads,
            outputs: Vec::new(),
            stages: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn write_table(&mut self, file: &str, table: &Table) -> Result<(), LabError> {
        let bytes = table.to_bytes();
        let path = self.dir.join(file);
        let mut f = fs::File::create(&path).map_err(|e| LabError::io(&path, e))?;
        f.write_all(&bytes).map_err(|e| LabError::io(&path, e))?;
        self.outputs.push(OutputEntry { file: file.into(), sha256: sha256_hex(&bytes), rows: table.rows.len() });
        Ok(())
    }

    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T, LabError>) -> Result<T, LabError> {
        let t = Instant::now();
        let out = f()?;
        self.stages.push(StageTiming { stage: name.into(), seconds: t.elapsed().as_secs_f64() });
        Ok(out)
    }

    pub fn finish(self) -> Result<Manifest, LabError> {
        let manifest = Manifest {
            subcommand: self.subcommand,
            build: build_id(),
            seed: self.seed,
            threads: self.threads,
            config_sha256: sha256_hex(self.config_text.as_bytes()),
            outputs: self.outputs,
            wall_seconds: self.started.elapsed().as_secs_f64(),
            stages: self.stages,
        };
        let path = self.dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, text).map_err(|e| LabError::io(&path, e))?;
        Ok(manifest)
    }
}
