//! Run manifests: the resolved scenario, the outputs and their digests.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Running,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub status: Status,
    /// Scenario after command-line overrides.
    pub scenario: Scenario,
    pub seed: u64,
    pub replicates: usize,
    pub events: bool,
    /// Output files, relative to the manifest's directory.
    pub outputs: Vec<String>,
    /// SHA-256 of each output, hex encoded.
    pub digests: BTreeMap<String, String>,
    pub duration_secs: Option<f64>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl Manifest {
    pub fn new(command: &str, scenario: &Scenario, events: bool) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            status: Status::Running,
            scenario: scenario.clone(),
            seed: scenario.seed,
            replicates: scenario.replicates,
            events,
            outputs: Vec::new(),
            digests: BTreeMap::new(),
            duration_secs: None,
        }
    }

    pub fn read(dir: &Path) -> Result<Manifest> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Parse { path, msg: e.to_string() })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self).map_err(|e| CliError::Data(e.to_string()))?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }

    pub fn record(&mut self, name: &str, bytes: &[u8]) {
        self.outputs.push(name.to_string());
        self.digests.insert(name.to_string(), sha256_hex(bytes));
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
