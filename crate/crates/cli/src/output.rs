//! Run manifests and NDJSON series files.
//!
//! A series file holds one JSON object per line: a `manifest` line, then
//! `record` lines, then a `summary` line (or an `aborted` line if the run
//! failed). Nothing in it depends on the wall clock, so reruns of a config
//! are byte-identical; timestamps live only in `manifest.json`.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::config::{RunConfig, Subcommand};

/// The resolved config without its output location, which does not affect
/// results.
pub fn physics_config(cfg: &RunConfig) -> Value {
    let mut v = serde_json::to_value(cfg).expect("config serializes");
    if let Value::Object(m) = &mut v {
        m.remove("output");
    }
    v
}

/// SHA-256 of the compact JSON of [`physics_config`].
pub fn config_hash(cfg: &RunConfig) -> String {
    let text = serde_json::to_string(&physics_config(cfg)).expect("config serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Writes `manifest.json` into `dir`, before any compute.
pub fn write_manifest(dir: &Path, cmd: Subcommand, cfg: &RunConfig) -> io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let created = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
    let manifest = json!({
        "program": "betaplane",
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": cmd.name(),
        "config_sha256": config_hash(cfg),
        "created_unix": created,
        "series": cfg.output.series,
        "config": cfg,
    });
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n")?;
    Ok(path)
}

/// Line-oriented NDJSON writer, flushed after every line.
pub struct SeriesWriter<W: Write> {
    out: W,
    records: usize,
}

impl SeriesWriter<BufWriter<File>> {
    pub fn create(path: &Path) -> io::Result<Self> {
        Ok(SeriesWriter { out: BufWriter::new(File::create(path)?), records: 0 })
    }
}

impl<W: Write> SeriesWriter<W> {
    /// Starts a series with its manifest line.
    pub fn new(out: W, cmd: Subcommand, cfg: &RunConfig) -> io::Result<Self> {
        let mut w = SeriesWriter { out, records: 0 };
        w.header(cmd, cfg)?;
        Ok(w)
    }

    pub fn header(&mut self, cmd: Subcommand, cfg: &RunConfig) -> io::Result<()> {
        self.line(&json!({
            "kind": "manifest",
            "subcommand": cmd.name(),
            "config_sha256": config_hash(cfg),
            "config": physics_config(cfg),
        }))
    }

    /// Writes `value` (an object) with `"kind": "record"` prepended.
    pub fn record<T: Serialize>(&mut self, value: &T) -> io::Result<()> {
        self.records += 1;
        self.tagged("record", value)
    }

    pub fn summary<T: Serialize>(&mut self, value: &T) -> io::Result<()> {
        self.tagged("summary", value)
    }

    /// Marks the file as incomplete.
    pub fn aborted(&mut self, error: &str) -> io::Result<()> {
        self.line(&json!({ "kind": "aborted", "records": self.records, "error": error }))
    }

    pub fn records(&self) -> usize {
        self.records
    }

    pub fn into_inner(self) -> W {
        self.out
    }

    fn tagged<T: Serialize>(&mut self, kind: &str, value: &T) -> io::Result<()> {
        let mut obj = Map::new();
        obj.insert("kind".into(), Value::from(kind));
        match serde_json::to_value(value).map_err(io::Error::other)? {
            Value::Object(m) => obj.extend(m),
            other => {
                obj.insert("value".into(), other);
            }
        }
        self.line(&Value::Object(obj))
    }

    fn line(&mut self, v: &Value) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, v).map_err(io::Error::other)?;
        self.out.write_all(b"\n")?;
        self.out.flush()
    }
}
