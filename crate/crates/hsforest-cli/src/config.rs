//! Flat `key=value` configuration files. Keys match the long CLI flag names
//! exactly; command-line flags override file values.

use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

const KNOWN_KEYS: &[&str] = &[
    "iterations",
    "burnin",
    "thin",
    "trees-f",
    "trees-tau",
    "k",
    "omega-f",
    "omega-tau",
    "tree-a",
    "tree-b",
    "p-grow",
    "p-prune",
    "p-change",
    "nu",
    "psi",
    "seed",
    "invariant-codes",
    "no-propensity",
    "prop-trees",
    "prop-iterations",
    "prop-burnin",
    "progress-every",
    "level",
];

#[derive(Debug, Default)]
pub struct ConfigFile {
    values: HashMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
        let mut values = HashMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::usage(format!(
                    "{}: line {}: expected key=value",
                    path.display(),
                    idx + 1
                )));
            };
            let key = key.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::usage(format!(
                    "{}: line {}: unknown key '{key}'",
                    path.display(),
                    idx + 1
                )));
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(Self { values })
    }

    /// Typed lookup; `Ok(None)` when the key is absent.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                CliError::usage(format!("config key '{key}': cannot parse value '{raw}'"))
            }),
        }
    }
}
