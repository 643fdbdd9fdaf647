//! Flat `key = value` experiment configuration with command-line overrides.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{CliError, CliResult};

/// Lines are `key = value`; `#` starts a comment; blank lines are skipped.
/// Every lookup records the value it resolved to (given or default), so the
/// full effective configuration can be written next to the results.
#[derive(Debug, Default)]
pub struct Config {
    entries: BTreeMap<String, String>,
    resolved: RefCell<BTreeMap<String, String>>,
}

impl Config {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = split_pair(line).ok_or_else(|| {
                CliError::Config(format!("line {}: expected `key = value`, found {raw:?}", i + 1))
            })?;
            if entries.insert(k.to_string(), v.to_string()).is_some() {
                return Err(CliError::Config(format!("line {}: duplicate key {k:?}", i + 1)));
            }
        }
        Ok(Self {
            entries,
            resolved: RefCell::default(),
        })
    }

    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, pair: &str) -> CliResult<()> {
        let (k, v) =
            split_pair(pair).ok_or_else(|| CliError::Config(format!("override {pair:?} is not key=value")))?;
        self.entries.insert(k.to_string(), v.to_string());
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn record(&self, key: &str, value: &str) {
        self.resolved.borrow_mut().insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let v = self.entries.get(key).cloned();
        if let Some(v) = &v {
            self.record(key, v);
        }
        v
    }

    pub fn string_or(&self, key: &str, default: &str) -> String {
        let v = self.entries.get(key).map(String::as_str).unwrap_or(default).to_string();
        self.record(key, &v);
        v
    }

    pub fn require(&self, key: &str) -> CliResult<String> {
        self.get(key).ok_or_else(|| CliError::Config(format!("missing required key {key:?}")))
    }

    pub fn parse_or<T: FromStr + ToString>(&self, key: &str, default: T) -> CliResult<T> {
        match self.entries.get(key) {
            Some(v) => {
                self.record(key, v);
                parse_value(key, v)
            }
            None => {
                self.record(key, &default.to_string());
                Ok(default)
            }
        }
    }

    /// Comma separated list.
    pub fn list_or<T: FromStr + ToString + Clone>(&self, key: &str, default: &[T]) -> CliResult<Vec<T>> {
        match self.entries.get(key) {
            Some(v) => {
                self.record(key, v);
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| parse_value(key, s))
                    .collect()
            }
            None => {
                let joined = default.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
                self.record(key, &joined);
                Ok(default.to_vec())
            }
        }
    }

    /// Effective configuration: every key looked up so far plus any given
    /// key that was never read.
    pub fn resolved(&self) -> BTreeMap<String, String> {
        let mut out = self.entries.clone();
        out.extend(self.resolved.borrow().iter().map(|(k, v)| (k.clone(), v.clone())));
        out
    }
}

fn split_pair(s: &str) -> Option<(&str, &str)> {
    let (k, v) = s.split_once('=')?;
    let k = k.trim();
    (!k.is_empty()).then_some((k, v.trim()))
}

pub fn parse_value<T: FromStr>(key: &str, v: &str) -> CliResult<T> {
    v.parse()
        .map_err(|_| CliError::Config(format!("key {key:?}: cannot parse {v:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_override() {
        let mut c = Config::parse("# experiment\nexperiment = toy\nK = 100 # repeats\n\ndelta_grid = 0, 0.5,1\n").unwrap();
        c.apply_override("K=7").unwrap();
        assert_eq!(c.parse_or("K", 1usize).unwrap(), 7);
        assert_eq!(c.list_or("delta_grid", &[9.0]).unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(c.parse_or("k", 50usize).unwrap(), 50);
        let r = c.resolved();
        assert_eq!(r["k"], "50");
        assert_eq!(r["experiment"], "toy");
    }

    #[test]
    fn errors() {
        assert!(matches!(Config::parse("a = 1\na = 2"), Err(CliError::Config(_))));
        assert!(matches!(Config::parse("novalue"), Err(CliError::Config(_))));
        let c = Config::parse("n = ten").unwrap();
        assert!(c.parse_or("n", 1usize).is_err());
        assert!(c.require("missing").is_err());
    }
}
