//! Layered `key = value` settings: command-line flags over a config file
//! over built-in defaults.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::{usage, CliError, Result};

/// Every key accepted in a config file. Flags use the same names with `-`
/// in place of `_`.
pub const KEYS: &[&str] = &[
    "ns", "nt", "nr", "ni", "cp", "taps", "snr", "train", "test", "pool", "nb", "seed", "model", "agg", "opt", "lr",
    "beta1", "beta2", "eps", "batch", "epochs", "depth", "heads", "d_model", "d_ff", "mlp_hidden", "dropout",
    "fc_hidden", "csi_blocks", "detector", "csi", "data", "format",
];

/// Parses the flat config format: one `key = value` per line, `#` starts a
/// comment, blank lines are ignored.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return usage(format!("config line {}: expected `key = value`, got `{line}`", n + 1));
        };
        let key = k.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return usage(format!("config line {}: unknown key `{key}`", n + 1));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Ok(Self {
            values: parse_config(&text)?,
        })
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        debug_assert!(KEYS.contains(&key), "{key}");
        self.values.insert(key.to_string(), value.to_string());
    }

    pub fn set_opt(&mut self, key: &str, value: Option<impl Display>) {
        if let Some(v) = value {
            self.set(key, v);
        }
    }

    pub fn is_set(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| CliError::Usage(format!("invalid value `{v}` for `{key}`"))),
        }
    }

    pub fn get_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.values
            .get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| CliError::Usage(format!("invalid value `{v}` for `{key}`")))
            })
            .transpose()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}
