//! Service configuration: built-in defaults, overlaid by a TOML file,
//! overlaid by `MFRS_*` environment variables.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use mfrs_core::engine::EngineConfig;
use mfrs_core::ingestion::FramingPolicy;
use mfrs_core::memo::{GatePolicy, DEFAULT_ASSOCIATION_WINDOW_S};
use mfrs_core::store::Durability;
use mfrs_core::vision::{DetectorConfig, MatchConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_BIND: &str = "127.0.0.1:8080";
pub const DEFAULT_DATA_DIR: &str = "mfrs-data";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {}: {source}", path.display())]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("invalid value for {var}: {message}")]
    Env { var: &'static str, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub bind: String,
    /// Bearer token; `None` leaves the API open.
    pub token: Option<String>,
    pub durability: Durability,
    /// Seconds between journal checkpoints; 0 disables them.
    pub checkpoint_interval_s: u64,
    /// Largest accepted request body.
    pub max_body_bytes: usize,
    pub association_window_s: f64,
    pub detector: DetectorConfig,
    pub matching: MatchConfig,
    pub framing: FramingPolicy,
    pub gate: GatePolicy,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from(DEFAULT_DATA_DIR),
            bind: DEFAULT_BIND.to_string(),
            token: None,
            durability: Durability::default(),
            checkpoint_interval_s: 300,
            max_body_bytes: 32 << 20,
            association_window_s: DEFAULT_ASSOCIATION_WINDOW_S,
            detector: DetectorConfig::default(),
            matching: MatchConfig::default(),
            framing: FramingPolicy::default(),
            gate: GatePolicy::default(),
        }
    }
}

/// Environment variables consulted by [`ServiceConfig::load`].
pub const ENV_VARS: &[&str] = &[
    "MFRS_DATA_DIR",
    "MFRS_BIND",
    "MFRS_TOKEN",
    "MFRS_DURABILITY",
    "MFRS_ASSOCIATION_WINDOW_S",
    "MFRS_MATCH_TOLERANCE",
];

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// Defaults, then `path` when given, then the variables in `env`.
    pub fn load(path: Option<&Path>, env: &HashMap<String, String>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
                    path: path.to_path_buf(),
                    source,
                })?;
                Self::from_toml(&text).map_err(|source| ConfigError::Parse {
                    path: path.to_path_buf(),
                    source,
                })?
            }
            None => Self::default(),
        };
        config.apply_env(env)?;
        config.validate()?;
        Ok(config)
    }

    /// Snapshot of the process environment restricted to [`ENV_VARS`].
    pub fn process_env() -> HashMap<String, String> {
        ENV_VARS
            .iter()
            .filter_map(|k| std::env::var(k).ok().map(|v| (k.to_string(), v)))
            .collect()
    }

    pub fn apply_env(&mut self, env: &HashMap<String, String>) -> Result<(), ConfigError> {
        if let Some(v) = env.get("MFRS_DATA_DIR") {
            self.data_dir = PathBuf::from(v);
        }
        if let Some(v) = env.get("MFRS_BIND") {
            self.bind = v.clone();
        }
        if let Some(v) = env.get("MFRS_TOKEN") {
            self.token = (!v.is_empty()).then(|| v.clone());
        }
        if let Some(v) = env.get("MFRS_DURABILITY") {
            self.durability = match v.as_str() {
                "fsync" => Durability::Fsync,
                "buffered" => Durability::Buffered,
                _ => {
                    return Err(ConfigError::Env {
                        var: "MFRS_DURABILITY",
                        message: format!("{v:?} is not fsync or buffered"),
                    })
                }
            };
        }
        if let Some(v) = env.get("MFRS_ASSOCIATION_WINDOW_S") {
            self.association_window_s = parse_f64("MFRS_ASSOCIATION_WINDOW_S", v)?;
        }
        if let Some(v) = env.get("MFRS_MATCH_TOLERANCE") {
            self.matching.tolerance = parse_f64("MFRS_MATCH_TOLERANCE", v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.engine()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.bind.parse::<std::net::SocketAddr>().is_err() && !self.bind.contains(':') {
            return Err(ConfigError::Invalid(format!("bind address {:?} has no port", self.bind)));
        }
        Ok(())
    }

    pub fn engine(&self) -> EngineConfig {
        EngineConfig {
            detector: self.detector,
            matching: self.matching,
            framing: self.framing,
            gate: self.gate,
            association_window_s: self.association_window_s,
        }
    }

    /// The non-secret parameters served at `/api/config`.
    pub fn public(&self) -> PublicConfig {
        PublicConfig {
            association_window_s: self.association_window_s,
            framing: self.framing,
            match_tolerance: self.matching.tolerance,
            auth_required: self.token.is_some(),
            session_header: crate::SESSION_HEADER.to_string(),
        }
    }
}

fn parse_f64(var: &'static str, v: &str) -> Result<f64, ConfigError> {
    v.trim().parse().map_err(|_| ConfigError::Env {
        var,
        message: format!("{v:?} is not a number"),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublicConfig {
    pub association_window_s: f64,
    pub framing: FramingPolicy,
    pub match_tolerance: f64,
    pub auth_required: bool,
    pub session_header: String,
}
