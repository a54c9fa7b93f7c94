use std::path::{Path, PathBuf};

use mineroi_core::dataset::DateRange;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest";

/// One command invocation that wrote into an output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub config: Option<PathBuf>,
    pub data_hash: Option<String>,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub version: String,
    /// Final test range scored by `eval`.
    pub test_range: Option<DateRange>,
}

/// Every run recorded against an output directory, oldest first.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ManifestLog {
    #[serde(default, rename = "run")]
    pub runs: Vec<RunManifest>,
}

impl ManifestLog {
    pub fn load(dir: &Path) -> CliResult<Self> {
        let path = dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(Self::default());
        }
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
    }

    /// Appends `run` and rewrites the manifest.
    pub fn append(dir: &Path, run: RunManifest) -> CliResult<()> {
        let mut log = Self::load(dir)?;
        log.runs.push(run);
        let text = toml::to_string(&log).map_err(|e| CliError::internal(e.to_string()))?;
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, text).map_err(|e| CliError::internal(format!("{}: {e}", path.display())))
    }

    pub fn evaluated(&self, range: DateRange) -> bool {
        self.runs.iter().any(|r| r.command == "eval" && r.test_range == Some(range))
    }
}
