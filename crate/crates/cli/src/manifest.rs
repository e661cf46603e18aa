use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use time::format_description::well_known::Rfc3339;
use time::OffsetDateTime;

use crate::settings::Settings;

/// Written next to the outputs of every command. Passing it back through
/// `--config` repeats the run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    /// Resolved flag values, keyed by flag name.
    pub flags: BTreeMap<String, Value>,
    pub config: Settings,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub started_at: String,
    pub finished_at: String,
}

pub fn now() -> String {
    OffsetDateTime::now_utc()
        .format(&Rfc3339)
        .unwrap_or_else(|_| "unknown".into())
}

impl RunManifest {
    pub fn new(command: &str, config: Settings, started_at: String) -> Self {
        RunManifest {
            tool: "morphogen".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed: None,
            flags: BTreeMap::new(),
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started_at,
            finished_at: String::new(),
        }
    }

    pub fn flag(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        let v = serde_json::to_value(value).expect("flag value serializes");
        self.flags.insert(key.into(), v);
        self
    }

    pub fn write(&mut self, path: &Path) -> Result<()> {
        self.finished_at = now();
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }
}
