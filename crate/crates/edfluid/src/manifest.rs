//! Run manifests: everything needed to repeat a command, written to the
//! output directory before any computation starts.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::read_json;
use crate::error::AppError;
use crate::export::write_json;

pub const FILE_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Fully resolved configuration (overrides already applied).
    #[serde(default)]
    pub config: Option<Value>,
    /// Resolved experiment plan with the configuration inlined.
    #[serde(default)]
    pub plan: Option<Value>,
    /// Overrides as given on the command line, for the record.
    #[serde(default)]
    pub overrides: Vec<String>,
    /// Remaining command arguments.
    #[serde(default)]
    pub args: BTreeMap<String, Value>,
    pub seeds: Vec<u64>,
    pub output_dir: String,
    pub created_unix: u64,
}

impl RunManifest {
    pub fn new(command: &str, output_dir: &Path) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config: None,
            plan: None,
            overrides: Vec::new(),
            args: BTreeMap::new(),
            seeds: Vec::new(),
            output_dir: output_dir.display().to_string(),
            created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<(), AppError> {
        write_json(&dir.join(FILE_NAME), &serde_json::to_value(self).expect("manifest serializes"))
    }

    pub fn load(path: &Path) -> Result<Self, AppError> {
        serde_json::from_value(read_json(path)?).map_err(|e| AppError::Config(format!("manifest: {e}")))
    }

    pub fn arg<T: serde::de::DeserializeOwned>(&self, key: &str) -> Result<Option<T>, AppError> {
        match self.args.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => serde_json::from_value(v.clone())
                .map(Some)
                .map_err(|e| AppError::Config(format!("manifest argument `{key}`: {e}"))),
        }
    }
}
