//! Run manifests: the resolved configuration of any command that writes
//! files, written before any evaluation starts. A manifest is sufficient to
//! reproduce the run at parallelism 1.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use mnasfpn_core::evaluator::SurrogateSpec;
use mnasfpn_core::space::SearchSpaceDef;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub created_unix: u64,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub space: Option<SearchSpaceDef>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub controller: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latency_exponent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub repeats: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_image_size: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parallelism: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lut: Option<PathBuf>,
    /// `surrogate` or `exchange:<dir>`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evaluator: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub surrogate: Option<SurrogateSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub history: Option<PathBuf>,
    /// Files the command writes.
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(command: &str, space: SearchSpaceDef) -> RunManifest {
        RunManifest { space: Some(space), ..RunManifest::bare(command) }
    }

    pub fn bare(command: &str) -> RunManifest {
        RunManifest {
            tool: "mnasfpn".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            command: command.to_string(),
            space: None,
            seed: None,
            budget: None,
            batch_size: None,
            controller: None,
            latency_exponent: None,
            repeats: None,
            input_image_size: None,
            parallelism: None,
            lut: None,
            evaluator: None,
            surrogate: None,
            history: None,
            outputs: Vec::new(),
        }
    }

    /// `<primary output>.manifest.json`.
    pub fn path_for(primary_output: &Path) -> PathBuf {
        let mut name = primary_output.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        primary_output.with_file_name(name)
    }

    pub fn write_next_to(&self, primary_output: &Path) -> Result<PathBuf> {
        let path = RunManifest::path_for(primary_output);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(&path, text)
            .with_context(|| format!("writing manifest {}", path.display()))?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<RunManifest> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading manifest {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }
}
