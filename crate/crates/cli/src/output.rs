//! CSV/JSON artifacts and the run manifest.

use std::path::Path;

use serde_json::json;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

/// Comma-separated table with `#` comment lines above the header.
pub struct Table {
    comments: Vec<String>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { comments: Vec::new(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn comment(mut self, line: impl Into<String>) -> Self {
        self.comments.push(line.into());
        self
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
    }

    pub fn into_artifact(self, name: &str) -> Artifact {
        let mut out = Vec::new();
        for c in &self.comments {
            out.extend_from_slice(format!("# {c}\n").as_bytes());
        }
        {
            let mut w = csv::WriterBuilder::new().from_writer(&mut out);
            w.write_record(&self.header).expect("in-memory write");
            for r in &self.rows {
                w.write_record(r).expect("in-memory write");
            }
            w.flush().expect("in-memory write");
        }
        Artifact { name: name.to_string(), bytes: out }
    }
}

pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x}")
    }
}

pub fn json_artifact(name: &str, value: &serde_json::Value) -> Artifact {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable value");
    bytes.push(b'\n');
    Artifact { name: name.to_string(), bytes }
}

pub fn sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes every artifact plus `manifest.json` into `dir`.
pub fn write_all(dir: &Path, kind: &str, config_bytes: &[u8], seed: u64, artifacts: &[Artifact]) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut files = Vec::with_capacity(artifacts.len());
    for a in artifacts {
        let path = dir.join(&a.name);
        std::fs::write(&path, &a.bytes).map_err(|e| CliError::io(&path, e))?;
        files.push(json!({ "name": a.name, "sha256": sha256(&a.bytes), "bytes": a.bytes.len() }));
    }
    let manifest = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "kind": kind,
        "config_sha256": sha256(config_bytes),
        "seed": seed,
        "files": files,
    });
    let m = json_artifact("manifest.json", &manifest);
    let path = dir.join(&m.name);
    std::fs::write(&path, &m.bytes).map_err(|e| CliError::io(&path, e))
}
