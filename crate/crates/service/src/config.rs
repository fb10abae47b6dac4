//! Engine configuration shared by the CLI and the session service.

use std::fs;
use std::path::{Path, PathBuf};

use iritrack_core::decision::DecisionConfig;
use iritrack_core::iris::TrackConfig;
use iritrack_core::pattern::PatternConfig;
use iritrack_core::simulator::{GazeNoiseModel, PhotoAttack, ReplayConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Environment variable naming a JSON config file.
pub const CONFIG_ENV: &str = "IRITRACK_CONFIG";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("cannot parse config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    /// Time allowed past the slipper's run before a session expires, ms.
    pub grace_ms: f64,
    /// Keyframe spacing of the issued schedule, ms.
    pub frame_interval_ms: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            grace_ms: 2000.0,
            frame_interval_ms: 1000.0 / 60.0,
        }
    }
}

/// Every tunable of the engine. Keys mirror the core module configs and
/// any omitted key takes its default.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub pattern: PatternConfig,
    pub decision: DecisionConfig,
    pub tracking: TrackConfig,
    pub noise: GazeNoiseModel,
    pub replay: ReplayConfig,
    pub photo: PhotoAttack,
    pub session: SessionConfig,
}

impl EngineConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads `explicit` if given, else the file named by [`CONFIG_ENV`],
    /// else the defaults.
    pub fn resolve(explicit: Option<&Path>) -> Result<Self, ConfigError> {
        match explicit {
            Some(p) => Self::load(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) if !p.is_empty() => Self::load(Path::new(&p)),
                _ => Ok(Self::default()),
            },
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: String| ConfigError::Invalid(e);
        self.pattern.validate().map_err(|e| invalid(e.to_string()))?;
        self.decision.validate().map_err(invalid)?;
        self.noise.validate().map_err(|e| invalid(e.to_string()))?;
        if self.tracking.locator.r_min > self.tracking.locator.r_max {
            return Err(invalid("tracking.locator.r_min exceeds r_max".into()));
        }
        let s = &self.session;
        if !(s.grace_ms.is_finite() && s.grace_ms >= 0.0) {
            return Err(invalid(format!("session.grace_ms must be non-negative, got {}", s.grace_ms)));
        }
        if !(s.frame_interval_ms.is_finite() && s.frame_interval_ms > 0.0) {
            return Err(invalid(format!(
                "session.frame_interval_ms must be positive, got {}",
                s.frame_interval_ms
            )));
        }
        Ok(())
    }
}
