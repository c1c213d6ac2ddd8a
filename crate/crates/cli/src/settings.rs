// SPDX-License-Identifier: Apache-2.0

//! Flag resolution: command line first, then the `--config` file, then defaults.
//!
//! The config file is one JSON object. `jobs` and `seed` sit at the top level;
//! every subcommand reads its own section, named after it, whose keys are the
//! flag names (`median_scope` and `median-scope` are both accepted).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use anyhow::{anyhow, bail, Context};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

const COMMANDS: [&str; 9] = [
    "curvature",
    "ma",
    "enrich",
    "collapse",
    "prune",
    "delta_loss",
    "gen_barbell",
    "spectral",
    "report",
];
const GLOBAL_KEYS: [&str; 2] = ["jobs", "seed"];

/// Bad invocation: missing or conflicting flags.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn normalize(key: &str) -> String {
    key.replace('-', "_")
}

fn flag_name(key: &str) -> String {
    format!("--{}", key.replace('_', "-"))
}

#[derive(Debug, Default)]
pub struct Settings {
    global: Map<String, Value>,
    section: Map<String, Value>,
    section_name: String,
    used: BTreeSet<String>,
    snapshot: BTreeMap<String, Value>,
}

impl Settings {
    pub fn load(path: Option<&Path>, command: &str) -> anyhow::Result<Settings> {
        let section_name = normalize(command);
        let Some(path) = path else {
            return Ok(Settings {
                section_name,
                ..Default::default()
            });
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let value: Value = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        let Value::Object(top) = value else {
            bail!("config {} must be a JSON object", path.display());
        };

        let mut global = Map::new();
        let mut section = Map::new();
        for (key, value) in top {
            let key = normalize(&key);
            if GLOBAL_KEYS.contains(&key.as_str()) {
                global.insert(key, value);
            } else if COMMANDS.contains(&key.as_str()) {
                if key != section_name {
                    continue;
                }
                let Value::Object(entries) = value else {
                    bail!("config section {key:?} must be an object");
                };
                section = entries
                    .into_iter()
                    .map(|(k, v)| (normalize(&k), v))
                    .collect();
            } else {
                bail!("unknown config key {key:?} in {}", path.display());
            }
        }
        Ok(Settings {
            global,
            section,
            section_name,
            used: BTreeSet::new(),
            snapshot: BTreeMap::new(),
        })
    }

    fn resolve<T: Serialize + DeserializeOwned>(
        &mut self,
        key: &str,
        flag: Option<T>,
        global: bool,
    ) -> anyhow::Result<Option<T>> {
        let from_file = if global {
            self.global.get(key)
        } else {
            self.used.insert(key.to_owned());
            self.section.get(key)
        };
        let value = match flag {
            Some(v) => Some(v),
            None => match from_file {
                Some(raw) => Some(
                    serde_json::from_value(raw.clone())
                        .with_context(|| format!("config value for {key:?}"))?,
                ),
                None => None,
            },
        };
        if let Some(v) = &value {
            self.snapshot
                .insert(key.to_owned(), serde_json::to_value(v)?);
        }
        Ok(value)
    }

    pub fn global_opt<T: Serialize + DeserializeOwned>(
        &mut self,
        key: &str,
        flag: Option<T>,
    ) -> anyhow::Result<Option<T>> {
        self.resolve(key, flag, true)
    }

    pub fn global_or<T: Serialize + DeserializeOwned>(
        &mut self,
        key: &str,
        flag: Option<T>,
        default: T,
    ) -> anyhow::Result<T> {
        let v = self.resolve(key, flag, true)?.unwrap_or(default);
        self.snapshot
            .insert(key.to_owned(), serde_json::to_value(&v)?);
        Ok(v)
    }

    pub fn opt<T: Serialize + DeserializeOwned>(
        &mut self,
        key: &str,
        flag: Option<T>,
    ) -> anyhow::Result<Option<T>> {
        self.resolve(key, flag, false)
    }

    pub fn or<T: Serialize + DeserializeOwned>(
        &mut self,
        key: &str,
        flag: Option<T>,
        default: T,
    ) -> anyhow::Result<T> {
        let v = self.resolve(key, flag, false)?.unwrap_or(default);
        self.snapshot
            .insert(key.to_owned(), serde_json::to_value(&v)?);
        Ok(v)
    }

    pub fn req<T: Serialize + DeserializeOwned>(
        &mut self,
        key: &str,
        flag: Option<T>,
    ) -> anyhow::Result<T> {
        self.resolve(key, flag, false)?
            .ok_or_else(|| UsageError(format!("missing required {}", flag_name(key))).into())
    }

    /// Boolean switch: set by the flag or by `true` in the config.
    pub fn switch(&mut self, key: &str, flag: bool) -> anyhow::Result<bool> {
        self.or(key, flag.then_some(true), false)
    }

    /// String-valued choice decoded into a serde enum of the core crate.
    pub fn choice<T: DeserializeOwned>(
        &mut self,
        key: &str,
        flag: Option<String>,
        default: &str,
    ) -> anyhow::Result<T> {
        let text = self.or(key, flag, default.to_owned())?;
        serde_json::from_value(Value::String(text.clone()))
            .map_err(|_| anyhow!("invalid value {text:?} for {}", flag_name(key)))
    }

    /// Resolved values, after checking the config section named no unknown keys.
    pub fn finish(self) -> anyhow::Result<BTreeMap<String, Value>> {
        if let Some(key) = self.section.keys().find(|k| !self.used.contains(*k)) {
            bail!(
                "unknown key {key:?} in config section {:?}",
                self.section_name
            );
        }
        Ok(self.snapshot)
    }
}
