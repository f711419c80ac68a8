use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use tsd_core::model::ModelConfig;

use crate::settings::EmbeddingSettings;

/// Record of one command invocation, written next to its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub toolkit_version: String,
    pub seed: Option<u64>,
    pub model: Option<ModelConfig>,
    pub embedding: Option<EmbeddingSettings>,
    pub inputs: BTreeMap<String, PathBuf>,
    pub outputs: BTreeMap<String, PathBuf>,
    /// Command-specific results (counts, scores).
    pub results: BTreeMap<String, serde_json::Value>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis())
}

impl RunManifest {
    pub fn start(command: &str) -> Self {
        RunManifest {
            command: command.to_string(),
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: None,
            model: None,
            embedding: None,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            results: BTreeMap::new(),
            started_unix_ms: now_ms(),
            finished_unix_ms: 0,
        }
    }

    pub fn input(&mut self, name: &str, path: impl Into<PathBuf>) -> &mut Self {
        self.inputs.insert(name.into(), path.into());
        self
    }

    pub fn output(&mut self, name: &str, path: impl Into<PathBuf>) -> &mut Self {
        self.outputs.insert(name.into(), path.into());
        self
    }

    pub fn result(&mut self, name: &str, value: impl Serialize) -> &mut Self {
        self.results.insert(
            name.into(),
            serde_json::to_value(value).expect("results are plain data"),
        );
        self
    }

    pub fn finish(&mut self, path: &Path) -> Result<()> {
        self.finished_unix_ms = now_ms();
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json + "\n").with_context(|| format!("writing manifest {}", path.display()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }
}

/// `dir/manifest.json` for directory outputs, `name.manifest.json` beside a
/// file output.
pub fn manifest_path_for(output: &Path) -> PathBuf {
    if output.is_dir() {
        output.join("manifest.json")
    } else {
        let stem = output
            .file_stem()
            .map_or("output".into(), |s| s.to_string_lossy().into_owned());
        output.with_file_name(format!("{stem}.manifest.json"))
    }
}
