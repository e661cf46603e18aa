//! Run settings: built-in defaults, then an optional config file, then
//! command-line flags.
//!
//! A config file is either `key = value` text or a manifest written by an
//! earlier run. Keys are flag names (`steps`, `seed`, ...) or dotted paths
//! into the resolved config (`growth.max_step`, `ga.mutation_sigma`,
//! `grid.resolution`, `growth.channels.split`).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use morphogen::{GaConfig, GridConfig, GrowthConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::manifest::RunManifest;

/// Flag names a config file may set.
pub const FLAG_KEYS: &[&str] = &[
    "genome",
    "random",
    "seed",
    "steps",
    "out",
    "stats",
    "debug-heightmap",
    "count",
    "seed-base",
    "out-dir",
    "workers",
    "pop",
    "generations",
];

/// Everything a run depends on besides its flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub growth: GrowthConfig,
    pub ga: GaConfig,
    pub grid: GridConfig,
}

#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    flags: BTreeMap<String, String>,
    /// Leaf overrides as (path, value).
    overrides: Vec<(Vec<String>, Value)>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let parsed = if text.trim_start().starts_with('{') {
            Self::from_manifest(&text)
        } else {
            Self::from_key_values(&text)
        };
        parsed.with_context(|| format!("config {}", path.display()))
    }

    pub fn from_key_values(text: &str) -> Result<Self> {
        let mut out = ConfigFile::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value", n + 1))?;
            let (key, value) = (key.trim(), value.trim());
            if key.contains('.') {
                // numbers and booleans as JSON, anything else as a string
                let v = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.into()));
                out.overrides
                    .push((key.split('.').map(str::to_owned).collect(), v));
            } else if FLAG_KEYS.contains(&key) {
                out.flags.insert(key.to_owned(), value.to_owned());
            } else {
                bail!("line {}: unknown key `{key}`", n + 1);
            }
        }
        Ok(out)
    }

    pub fn from_manifest(text: &str) -> Result<Self> {
        let manifest: RunManifest = serde_json::from_str(text).context("parsing manifest")?;
        let mut out = ConfigFile::default();
        for (k, v) in manifest.flags {
            let s = match v {
                Value::String(s) => s,
                Value::Null => continue,
                other => other.to_string(),
            };
            out.flags.insert(k, s);
        }
        let config = serde_json::to_value(&manifest.config)?;
        collect_leaves(&config, &mut Vec::new(), &mut out.overrides);
        Ok(out)
    }

    /// Value of a flag key, parsed.
    pub fn flag<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        self.flags
            .get(key)
            .map(|s| {
                s.parse::<T>()
                    .map_err(|e| anyhow!("config key `{key}`: {e}"))
            })
            .transpose()
    }

    /// Defaults with every dotted override applied.
    pub fn resolve(&self) -> Result<Settings> {
        let mut tree = serde_json::to_value(Settings::default())?;
        for (path, value) in &self.overrides {
            let key = path.join(".");
            let slot = path
                .iter()
                .try_fold(&mut tree, |node, part| node.get_mut(part.as_str()))
                .ok_or_else(|| anyhow!("unknown config key `{key}`"))?;
            if slot.is_object() {
                bail!("config key `{key}` names a section, not a value");
            }
            *slot = value.clone();
        }
        serde_json::from_value(tree).context("config values")
    }
}

fn collect_leaves(node: &Value, path: &mut Vec<String>, out: &mut Vec<(Vec<String>, Value)>) {
    match node {
        Value::Object(map) => {
            for (k, v) in map {
                path.push(k.clone());
                collect_leaves(v, path, out);
                path.pop();
            }
        }
        leaf => out.push((path.clone(), leaf.clone())),
    }
}
