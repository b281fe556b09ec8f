//! Flat `key = value` settings: config file first, explicit flags on top.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use adasurv::{Error, Result};

/// Every key a config file may set, in manifest order.
pub const KNOWN_KEYS: &[&str] = &[
    "data",
    "time_col",
    "status_col",
    "cause_col",
    "covariates",
    "ignore",
    "derive_cause",
    "time_units",
    "model",
    "input",
    "output",
    "out",
    "method",
    "methods",
    "aggregation",
    "aggregations",
    "iterations",
    "ntree",
    "mtry",
    "d0",
    "min_child_events",
    "max_depth",
    "tau",
    "esf_cutpoints",
    "split_rule",
    "epsilon_floor",
    "epsilon_ceiling",
    "seed",
    "cause",
    "cause_handling",
    "profile",
    "test_fraction",
    "stratified",
    "rmse_scope",
    "dataset_id",
    "threads",
];

/// Keys holding filesystem paths; relative values in a config file are
/// taken relative to that file's directory.
const PATH_KEYS: &[&str] = &["data", "model", "input", "output", "out"];

pub fn normalize_key(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn load(path: &Path) -> Result<Settings> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        Settings::parse(&text, base).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Parses `key = value` lines; `#` starts a comment line.
    pub fn parse(text: &str, base: &Path) -> Result<Settings> {
        let mut values = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            let key = normalize_key(key);
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(Error::Config(format!("line {}: unknown key '{key}'", n + 1)));
            }
            let mut value = value.trim().to_string();
            if PATH_KEYS.contains(&key.as_str()) && !value.is_empty() && Path::new(&value).is_relative() {
                value = base.join(&value).to_string_lossy().into_owned();
            }
            if values.insert(key.clone(), value).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key '{key}'", n + 1)));
            }
        }
        Ok(Settings { values })
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(normalize_key(key), value.into());
    }

    /// The value of `key`, treating an empty value as unset.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str).filter(|v| !v.is_empty())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Config(format!("missing required setting '{}'", key.replace('_', "-"))))
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(PathBuf::from)
    }

    pub fn parsed<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.get(key)
            .map(|raw| {
                raw.parse::<T>()
                    .map_err(|e| Error::Config(format!("invalid value '{raw}' for '{key}': {e}")))
            })
            .transpose()
    }

    pub fn parsed_or<T>(&self, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    /// Comma-separated list; empty when unset.
    pub fn list(&self, key: &str) -> Vec<String> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn flag(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key).map(|v| v.to_ascii_lowercase()) {
            None => Ok(default),
            Some(v) => match v.as_str() {
                "1" | "true" | "yes" | "on" => Ok(true),
                "0" | "false" | "no" | "off" => Ok(false),
                _ => Err(Error::Config(format!("invalid boolean '{v}' for '{key}'"))),
            },
        }
    }
}

/// Resolved settings in emission order, rendered as a re-runnable config.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn push(&mut self, key: &str, value: impl Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn push_opt<T: Display>(&mut self, key: &str, value: Option<T>) {
        if let Some(v) = value {
            self.push(key, v);
        }
    }

    pub fn push_path(&mut self, key: &str, path: &Path) {
        let abs = std::path::absolute(path).unwrap_or_else(|_| path.to_path_buf());
        self.push(key, abs.display());
    }

    pub fn render(&self, command: &str) -> String {
        let mut s = format!("# adasurv {command} manifest; re-run with: adasurv {command} --config <this file>\n");
        for (k, v) in &self.entries {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }
}
