//! Run manifest written next to every output file. Its `[config]` table is
//! the fully resolved configuration, so `--config <manifest>` reproduces the
//! run.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::Config;

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: String,
    pub version: String,
    pub seed: u64,
    pub wall_clock_s: f64,
    pub output: String,
    /// SHA-256 of the output without the wall-clock column.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_sha256: Option<String>,
    pub config: Config,
}

impl RunManifest {
    pub fn new(command: &str, config_path: &Path, config: &Config, output: &Path) -> Self {
        Self {
            command: command.to_string(),
            config_path: config_path.display().to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.noise.seed,
            wall_clock_s: 0.0,
            output: output.display().to_string(),
            output_sha256: None,
            config: config.clone(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    /// `<output>.manifest.toml`.
    pub fn path_for(output: &Path) -> PathBuf {
        let mut name = output.as_os_str().to_owned();
        name.push(".manifest.toml");
        PathBuf::from(name)
    }

    pub fn write(&self, output: &Path) -> std::io::Result<PathBuf> {
        let path = Self::path_for(output);
        std::fs::write(&path, self.to_toml())?;
        Ok(path)
    }
}
