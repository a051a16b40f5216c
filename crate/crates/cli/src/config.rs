//! `key = value` configuration files merged under command-line flags.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::CliError;

/// Values from a config file, restricted to the keys a command accepts.
#[derive(Debug, Default)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
}

impl FileConfig {
    /// Blank lines and lines starting with `#` are skipped. Keys may use `-`
    /// or `_` interchangeably.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected `key = value`", k + 1)))?;
            let key = key.trim().replace('_', "-");
            if values.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(CliError::Usage(format!("config line {}: duplicate key `{key}`", k + 1)));
            }
        }
        Ok(Self { values })
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => Self::parse(&fs::read_to_string(p).map_err(|e| CliError::io(p, e))?),
        }
    }

    /// Rejects keys outside `allowed`.
    pub fn restrict(&self, allowed: &[&str]) -> Result<(), CliError> {
        match self.values.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(CliError::Usage(format!(
                "unknown config key `{k}` (expected one of: {})",
                allowed.join(", ")
            ))),
            None => Ok(()),
        }
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.values
            .get(key)
            .map(|v| {
                v.parse()
                    .map_err(|e| CliError::Usage(format!("config key `{key}`: cannot parse `{v}`: {e}")))
            })
            .transpose()
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.raw(key).map(PathBuf::from)
    }

    /// Flag value, else config value.
    pub fn merge<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }
}
