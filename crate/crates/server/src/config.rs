use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use transit_core::arrivals::{DEFAULT_HORIZON_S, DEFAULT_LOOKBACK_S};
use transit_core::TrackerConfig;

pub const DEFAULT_RADIUS_M: f64 = 500.0;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config {path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("config: {0}")]
    Invalid(String),
}

/// Query defaults applied when a request leaves a parameter out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QueryDefaults {
    pub horizon_s: i64,
    pub lookback_s: i64,
    pub default_radius_m: f64,
}

impl Default for QueryDefaults {
    fn default() -> Self {
        QueryDefaults {
            horizon_s: DEFAULT_HORIZON_S,
            lookback_s: DEFAULT_LOOKBACK_S,
            default_radius_m: DEFAULT_RADIUS_M,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen_addr: String,
    pub feed_dir: PathBuf,
    pub alerts_path: PathBuf,
    #[serde(default)]
    pub tracker: TrackerConfig,
    #[serde(default)]
    pub defaults: QueryDefaults,
    /// Unix time of the service day's midnight for schedule-only estimates.
    /// When absent, midnight UTC of the current day is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub service_day_start_ts: Option<i64>,
}

impl ServiceConfig {
    /// Reads the file and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let bytes = std::fs::read(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config: ServiceConfig =
            serde_json::from_slice(&bytes).map_err(|source| ConfigError::Parse {
                path: path.to_path_buf(),
                source,
            })?;
        let base = path.parent().unwrap_or(Path::new("."));
        if config.feed_dir.is_relative() {
            config.feed_dir = base.join(&config.feed_dir);
        }
        if config.alerts_path.is_relative() {
            config.alerts_path = base.join(&config.alerts_path);
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !self.feed_dir.is_dir() {
            return Err(ConfigError::Invalid(format!(
                "feed_dir {} is not a directory",
                self.feed_dir.display()
            )));
        }
        // the snapshot itself may not exist yet, its directory must
        let parent = self
            .alerts_path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        if !parent.is_dir() {
            return Err(ConfigError::Invalid(format!(
                "alerts_path directory {} does not exist",
                parent.display()
            )));
        }
        self.tracker
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let d = &self.defaults;
        if d.horizon_s <= 0 || d.lookback_s <= 0 {
            return Err(ConfigError::Invalid(
                "defaults.horizon_s and defaults.lookback_s must be positive".into(),
            ));
        }
        if !(d.default_radius_m.is_finite() && d.default_radius_m > 0.0) {
            return Err(ConfigError::Invalid(
                "defaults.default_radius_m must be positive".into(),
            ));
        }
        Ok(())
    }
}
