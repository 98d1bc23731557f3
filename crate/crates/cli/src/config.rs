//! Plain-text `key = value` run configuration.
//!
//! Keys are the long flag names without the leading dashes. Values are
//! resolved in order: built-in default, config file, command-line flag. Every
//! command writes the resolved settings to `resolved.cfg` in its output
//! directory, and that file alone reproduces the run.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{write_failed, CliError, CliResult};

pub const RESOLVED_FILE: &str = "resolved.cfg";

/// Allowed keys of one command, in echo order, with their defaults.
pub struct KeySpec {
    pub command: &'static str,
    pub keys: &'static [(&'static str, Option<&'static str>)],
}

/// Parses config file text into an ordered map, rejecting duplicates and
/// malformed lines.
pub fn parse_config(text: &str) -> CliResult<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("config line {}: expected key = value", n + 1)))?;
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(CliError::usage(format!("config line {}: empty key", n + 1)));
        }
        if out.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(CliError::usage(format!("config line {}: duplicate key {key:?}", n + 1)));
        }
    }
    Ok(out)
}

/// Fully resolved settings for one command.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    command: &'static str,
    /// In the command's key order; keys without a value are absent.
    values: Vec<(&'static str, String)>,
}

impl Settings {
    /// Merges defaults, the optional config file and flag overrides.
    pub fn resolve(spec: &KeySpec, config: Option<&Path>, flags: &[(&'static str, Option<String>)]) -> CliResult<Self> {
        let mut file = match config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
                parse_config(&text)?
            }
            None => BTreeMap::new(),
        };
        if let Some(cmd) = file.remove("command") {
            if cmd != spec.command {
                return Err(CliError::usage(format!(
                    "config is for command {cmd:?}, not {:?}",
                    spec.command
                )));
            }
        }
        if let Some(unknown) = file.keys().find(|k| !spec.keys.iter().any(|(name, _)| name == k)) {
            return Err(CliError::usage(format!(
                "unknown config key {unknown:?} for command {}",
                spec.command
            )));
        }
        let mut values = Vec::new();
        for &(key, default) in spec.keys {
            let flag = flags.iter().find(|(k, _)| *k == key).and_then(|(_, v)| v.clone());
            let value = flag.or_else(|| file.get(key).cloned()).or_else(|| default.map(str::to_string));
            if let Some(v) = value {
                values.push((key, v));
            }
        }
        debug_assert!(flags.iter().all(|(k, _)| spec.keys.iter().any(|(name, _)| name == k)));
        Ok(Self {
            command: spec.command,
            values,
        })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.iter().find(|(k, _)| *k == key).map(|(_, v)| v.as_str())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> CliResult<Option<T>>
    where
        T::Err: Display,
    {
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|e| CliError::usage(format!("invalid value {v:?} for {key}: {e}"))))
            .transpose()
    }

    pub fn require<T: FromStr>(&self, key: &str) -> CliResult<T>
    where
        T::Err: Display,
    {
        self.get(key)?
            .ok_or_else(|| CliError::usage(format!("missing required setting {key} (--{key})")))
    }

    /// A comma-separated list.
    pub fn list<T: FromStr>(&self, key: &str) -> CliResult<Vec<T>>
    where
        T::Err: Display,
    {
        let raw = self
            .raw(key)
            .ok_or_else(|| CliError::usage(format!("missing required setting {key} (--{key})")))?;
        let items: Vec<T> = raw
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<T>().map_err(|e| CliError::usage(format!("invalid item {s:?} in {key}: {e}"))))
            .collect::<CliResult<_>>()?;
        if items.is_empty() {
            return Err(CliError::usage(format!("{key} must list at least one value")));
        }
        Ok(items)
    }

    pub fn path(&self, key: &str) -> CliResult<PathBuf> {
        self.require::<String>(key).map(PathBuf::from)
    }

    pub fn flag(&self, key: &str) -> CliResult<bool> {
        match self.raw(key) {
            None | Some("false") => Ok(false),
            Some("true") => Ok(true),
            Some(v) => Err(CliError::usage(format!("invalid value {v:?} for {key}: expected true or false"))),
        }
    }

    pub fn render(&self) -> String {
        let mut s = format!("command = {}\n", self.command);
        for (k, v) in &self.values {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }

    /// Creates `dir` and writes the resolved settings into it.
    pub fn echo(&self, dir: &Path) -> CliResult<()> {
        fs::create_dir_all(dir).map_err(|e| write_failed(dir, e))?;
        let path = dir.join(RESOLVED_FILE);
        fs::write(&path, self.render()).map_err(|e| write_failed(&path, e))
    }
}
