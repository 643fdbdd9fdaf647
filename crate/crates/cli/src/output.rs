//! Collects a run's frontiers and tables and writes them in one go, once the
//! effective configuration is complete.

use std::path::{Path, PathBuf};

use robust_frontier::Frontier;
use serde_json::{Map, Value};

use crate::config::Config;
use crate::error::{CliError, CliResult};

#[derive(Default)]
pub struct Artifacts {
    frontiers: Vec<(String, Frontier<f64>)>,
    tables: Vec<(String, Vec<String>, Vec<Vec<String>>)>,
    summary: Map<String, Value>,
}

impl Artifacts {
    pub fn frontier(&mut self, name: impl Into<String>, f: Frontier<f64>) {
        self.frontiers.push((name.into(), f));
    }

    pub fn table(&mut self, name: impl Into<String>, header: &[&str], rows: Vec<Vec<String>>) {
        self.tables.push((name.into(), header.iter().map(|s| s.to_string()).collect(), rows));
    }

    pub fn note(&mut self, key: &str, value: impl Into<Value>) {
        self.summary.insert(key.to_string(), value.into());
    }

    pub fn frontiers(&self) -> &[(String, Frontier<f64>)] {
        &self.frontiers
    }

    pub fn summary(&self) -> &Map<String, Value> {
        &self.summary
    }

    /// Writes `<name>.csv` (+ `<name>.json` meta) per frontier, one CSV per
    /// table and `summary.json`. Returns the paths written.
    pub fn write(mut self, out: &Path, command: &str, config: &Config) -> CliResult<Vec<PathBuf>> {
        std::fs::create_dir_all(out)
            .map_err(|e| CliError::Config(format!("cannot create output directory {}: {e}", out.display())))?;
        let resolved = config.resolved();
        let io = |path: &Path, e: String| CliError::Config(format!("cannot write {}: {e}", path.display()));
        let mut written = Vec::new();
        for (name, f) in &mut self.frontiers {
            f.meta.extra.insert("command".into(), command.to_string());
            for (k, v) in &resolved {
                f.meta.extra.insert(format!("config.{k}"), v.clone());
            }
            let path = out.join(format!("{name}.csv"));
            f.write(&path).map_err(|e| io(&path, e.to_string()))?;
            written.push(path);
        }
        for (name, header, rows) in &self.tables {
            let path = out.join(format!("{name}.csv"));
            let mut w = csv::Writer::from_path(&path).map_err(|e| io(&path, e.to_string()))?;
            w.write_record(header).map_err(|e| io(&path, e.to_string()))?;
            for r in rows {
                w.write_record(r).map_err(|e| io(&path, e.to_string()))?;
            }
            w.flush().map_err(|e| io(&path, e.to_string()))?;
            written.push(path);
        }
        let mut summary = Map::new();
        summary.insert("command".into(), command.into());
        summary.insert(
            "config".into(),
            Value::Object(resolved.into_iter().map(|(k, v)| (k, Value::String(v))).collect()),
        );
        summary.append(&mut self.summary);
        let path = out.join("summary.json");
        let text = serde_json::to_string_pretty(&Value::Object(summary)).expect("json values serialize") + "\n";
        std::fs::write(&path, text).map_err(|e| io(&path, e.to_string()))?;
        written.push(path);
        Ok(written)
    }
}

/// Shortest round-trip decimal.
pub fn num(v: f64) -> String {
    v.to_string()
}
