//! Flat key-value settings merged from a TOML file and the command line.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::path::Path;

use clap::parser::ValueSource;
use clap::ArgMatches;
use toml::{Table, Value};

use crate::error::CliError;

/// Keys that steer the process rather than the computation.
const PLUMBING: &[&str] = &["config", "out", "workers"];

pub const SEED_ENV: &str = "RELBEL_SEED";
pub const DEFAULT_SEED: u64 = 1;

/// Merged settings. Every key read is recorded with the value used so the
/// manifest can replay the run.
pub struct Settings {
    values: Table,
    resolved: RefCell<BTreeMap<String, Value>>,
}

impl Settings {
    /// Reads `path` (if any) and lays explicit command-line values on top.
    /// A manifest written by a previous run is accepted as a config file.
    pub fn load(path: Option<&Path>, matches: &ArgMatches) -> Result<Self, CliError> {
        let mut values = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                let mut t: Table = text
                    .parse()
                    .map_err(|e| CliError::Usage(format!("config {}: {e}", p.display())))?;
                match t.remove("config") {
                    Some(Value::Table(inner)) => inner,
                    Some(_) => return Err(CliError::Usage("`config` must be a table".into())),
                    None => t,
                }
            }
            None => Table::new(),
        };
        for (k, v) in &values {
            if matches!(v, Value::Table(_) | Value::Array(_)) {
                return Err(CliError::Usage(format!("config key `{k}` must be a scalar")));
            }
        }
        for id in matches.ids() {
            let key = id.as_str();
            if PLUMBING.contains(&key) {
                continue;
            }
            let Ok(Some(mut raw)) = matches.try_get_raw(key) else { continue };
            if matches.value_source(key) == Some(ValueSource::CommandLine) {
                if let Some(v) = raw.next() {
                    values.insert(key.to_string(), Value::String(v.to_string_lossy().into_owned()));
                }
            }
        }
        Ok(Self { values, resolved: RefCell::new(BTreeMap::new()) })
    }

    #[cfg(test)]
    pub fn from_table(values: Table) -> Self {
        Self { values, resolved: RefCell::new(BTreeMap::new()) }
    }

    fn record(&self, key: &str, v: Value) {
        self.resolved.borrow_mut().insert(key.to_string(), v);
    }

    pub fn has(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>, CliError> {
        let v = match self.values.get(key) {
            None => return Ok(None),
            Some(Value::Float(f)) => *f,
            Some(Value::Integer(i)) => *i as f64,
            Some(Value::String(s)) => s
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("`{key}` must be a number, got `{s}`")))?,
            Some(other) => return Err(CliError::Usage(format!("`{key}` must be a number, got {other}"))),
        };
        if !v.is_finite() {
            return Err(CliError::Usage(format!("`{key}` must be finite")));
        }
        self.record(key, Value::Float(v));
        Ok(Some(v))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        match self.opt_f64(key)? {
            Some(v) => Ok(v),
            None => {
                self.record(key, Value::Float(default));
                Ok(default)
            }
        }
    }

    pub fn req_f64(&self, key: &str) -> Result<f64, CliError> {
        self.opt_f64(key)?.ok_or_else(|| missing(key))
    }

    pub fn opt_u64(&self, key: &str) -> Result<Option<u64>, CliError> {
        let v = match self.values.get(key) {
            None => return Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => *i as u64,
            Some(Value::String(s)) => s
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("`{key}` must be a nonnegative integer, got `{s}`")))?,
            Some(other) => return Err(CliError::Usage(format!("`{key}` must be a nonnegative integer, got {other}"))),
        };
        self.record(key, Value::Integer(v as i64));
        Ok(Some(v))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, CliError> {
        match self.opt_u64(key)? {
            Some(v) => Ok(v as usize),
            None => {
                self.record(key, Value::Integer(default as i64));
                Ok(default)
            }
        }
    }

    pub fn req_usize(&self, key: &str) -> Result<usize, CliError> {
        Ok(self.opt_u64(key)?.ok_or_else(|| missing(key))? as usize)
    }

    pub fn opt_str(&self, key: &str) -> Result<Option<String>, CliError> {
        let v = match self.values.get(key) {
            None => return Ok(None),
            Some(Value::String(s)) => s.clone(),
            Some(other) => return Err(CliError::Usage(format!("`{key}` must be a string, got {other}"))),
        };
        self.record(key, Value::String(v.clone()));
        Ok(Some(v))
    }

    pub fn str_or(&self, key: &str, default: &str) -> Result<String, CliError> {
        match self.opt_str(key)? {
            Some(v) => Ok(v),
            None => {
                self.record(key, Value::String(default.to_string()));
                Ok(default.to_string())
            }
        }
    }

    pub fn req_str(&self, key: &str) -> Result<String, CliError> {
        self.opt_str(key)?.ok_or_else(|| missing(key))
    }

    pub fn flag(&self, key: &str) -> Result<bool, CliError> {
        let v = match self.values.get(key) {
            None => false,
            Some(Value::Boolean(b)) => *b,
            Some(Value::String(s)) => match s.as_str() {
                "true" => true,
                "false" => false,
                _ => return Err(CliError::Usage(format!("`{key}` must be true or false, got `{s}`"))),
            },
            Some(other) => return Err(CliError::Usage(format!("`{key}` must be true or false, got {other}"))),
        };
        self.record(key, Value::Boolean(v));
        Ok(v)
    }

    /// Seed from the merged settings, else `RELBEL_SEED`, else the default.
    pub fn seed(&self) -> Result<u64, CliError> {
        if let Some(s) = self.opt_u64("seed")? {
            return Ok(s);
        }
        let s = match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("{SEED_ENV} must be a nonnegative integer, got `{v}`")))?,
            Err(_) => DEFAULT_SEED,
        };
        self.record("seed", Value::Integer(s as i64));
        Ok(s)
    }

    /// Keys that were given but never read.
    pub fn unused(&self) -> Vec<String> {
        let r = self.resolved.borrow();
        self.values.keys().filter(|k| !r.contains_key(*k)).cloned().collect()
    }

    pub fn resolved(&self) -> Table {
        self.resolved.borrow().iter().map(|(k, v)| (k.clone(), v.clone())).collect()
    }
}

fn missing(key: &str) -> CliError {
    CliError::Usage(format!("missing required setting `{key}` (flag --{} or config key)", key.replace('_', "-")))
}
