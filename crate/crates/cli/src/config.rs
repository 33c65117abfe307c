//! Flat `key = value` run configuration.
//!
//! The file format is a list of assignments, one per line, with `#` line
//! comments and blank lines ignored.  Keys use dotted section names
//! (`grid.n`, `solver.dt`, `monitor.sup_threshold`); values are free text
//! parsed on demand.  Every lookup — including ones that fall back to a
//! default — is recorded, so the manifest can echo the complete effective
//! configuration and flag provided keys that no code path consumed.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::{CliError, Result};

/// Parsed configuration plus a record of which keys were consumed.
#[derive(Debug, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
    used: RefCell<BTreeMap<String, String>>,
}

impl Config {
    /// Read and parse a configuration file.
    pub fn load(path: &Path) -> Result<Config> {
        let text = fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read {}: {e}", path.display()))
        })?;
        Config::parse_str(&text)
    }

    /// Parse configuration text (exposed for tests).
    pub fn parse_str(text: &str) -> Result<Config> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!(
                    "line {}: expected `key = value`, got `{raw}`",
                    lineno + 1
                ))
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(CliError::Config(format!("line {}: empty key", lineno + 1)));
            }
            if values.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(CliError::Config(format!(
                    "line {}: duplicate key `{key}`",
                    lineno + 1
                )));
            }
        }
        Ok(Config { values, used: RefCell::new(BTreeMap::new()) })
    }

    fn record(&self, key: &str, effective: String) {
        self.used.borrow_mut().insert(key.to_string(), effective);
    }

    /// String-valued key with a default.
    pub fn string(&self, key: &str, default: &str) -> String {
        let value = self.values.get(key).cloned().unwrap_or_else(|| default.to_string());
        self.record(key, value.clone());
        value
    }

    /// String-valued key that must be present.
    pub fn required(&self, key: &str) -> Result<String> {
        match self.values.get(key) {
            Some(v) => {
                self.record(key, v.clone());
                Ok(v.clone())
            }
            None => Err(CliError::Config(format!("missing required key `{key}`"))),
        }
    }

    /// Parse a key into any `FromStr` type, falling back to `default`.
    ///
    /// `f64` values accept `inf` for "no threshold".
    pub fn parse<T>(&self, key: &str, default: T) -> Result<T>
    where
        T: FromStr + Display,
    {
        match self.values.get(key) {
            Some(raw) => {
                let value: T = raw.parse().map_err(|_| {
                    CliError::Config(format!("key `{key}`: cannot parse `{raw}`"))
                })?;
                self.record(key, value.to_string());
                Ok(value)
            }
            None => {
                self.record(key, default.to_string());
                Ok(default)
            }
        }
    }

    /// Boolean key; accepts `true`/`false`.
    pub fn flag(&self, key: &str, default: bool) -> Result<bool> {
        self.parse(key, default)
    }

    /// Overwrite the recorded effective value of a key, e.g. when a
    /// command-line flag overrides the config file.
    pub fn override_used(&self, key: &str, value: String) {
        self.record(key, value);
    }

    /// Snapshot of every key that was consulted, with its effective value.
    pub fn used(&self) -> BTreeMap<String, String> {
        self.used.borrow().clone()
    }

    /// Keys present in the file that no code path ever looked at.
    ///
    /// These usually indicate a typo in the config, so the manifest lists
    /// them explicitly instead of silently dropping them.
    pub fn ignored(&self) -> Vec<String> {
        let used: BTreeSet<_> = self.used.borrow().keys().cloned().collect();
        self.values
            .keys()
            .filter(|k| !used.contains(*k))
            .cloned()
            .collect()
    }
}
