//! Settings resolution: command-line flag, then `SCV_*` environment
//! variable (both handled by clap), then the config file, then the built-in
//! default.
//!
//! The config file is TOML with flat `key = value` pairs. Keys are the long
//! flag names without the leading dashes, with `_` accepted for `-`, e.g.
//! `alpha = 0.7` or `iso_method = "exact"`.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{CliResult, Fail};

pub const KEYS: &[&str] = &[
    "seed",
    "jobs",
    "output-dir",
    "format",
    "alpha",
    "flag-threshold",
    "similarity-provider",
    "similarity-threshold",
    "iso-method",
    "iso-exact-cap",
    "beta",
    "lambda",
    "numeric-rel-tol",
    "backend",
    "k0",
    "k-max",
    "tau-low",
    "tau-high",
    "rate",
    "corruption",
    "runs",
    "tau",
    "epsilon",
    "epsilon-prime",
    "k",
    "trials",
    "dag",
    "factuality",
    "delta-target",
    "threshold",
];

#[derive(Debug, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Fail::invalid(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|m| Fail::invalid(format!("config {}: {m}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| e.message().to_string())?;
        let mut values = BTreeMap::new();
        for (k, v) in table {
            let key = k.replace('_', "-");
            if !KEYS.contains(&key.as_str()) {
                return Err(format!("unknown key {k:?}"));
            }
            let s = match v {
                toml::Value::String(s) => s,
                toml::Value::Integer(i) => i.to_string(),
                toml::Value::Float(f) => f.to_string(),
                toml::Value::Boolean(b) => b.to_string(),
                other => return Err(format!("key {k:?}: unsupported value {other}")),
            };
            values.insert(key, s);
        }
        Ok(ConfigFile { values })
    }

    /// The flag value if given, else the config-file value, else `default`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> CliResult<T>
    where
        T::Err: std::fmt::Display,
    {
        debug_assert!(KEYS.contains(&key), "{key}");
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.values.get(key) {
            Some(raw) => raw
                .parse()
                .map_err(|e| Fail::invalid(format!("config key {key}: invalid value {raw:?}: {e}"))),
            None => Ok(default),
        }
    }

    pub fn pick_opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> CliResult<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.values
            .get(key)
            .map(|raw| {
                raw.parse()
                    .map_err(|e| Fail::invalid(format!("config key {key}: invalid value {raw:?}: {e}")))
            })
            .transpose()
    }
}
