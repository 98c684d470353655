use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use ceckd::ec::Tick;

pub const LISTEN_ENV: &str = "CECKD_LISTEN";

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub listen: SocketAddr,
    /// Directory holding `narrative.ndjson` and `rules.ndjson`.
    pub data_dir: PathBuf,
    /// Suppress window given to deployed rules that do not set one. Rules
    /// otherwise suppress for their pattern window.
    pub default_suppress_window: Option<Tick>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            listen: SocketAddr::from(([127, 0, 0, 1], 8080)),
            data_dir: PathBuf::from("ceckd-data"),
            default_suppress_window: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("parsing {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("{LISTEN_ENV}={value:?} is not a socket address")]
    Listen { value: String },
    #[error("default_suppress_window must be positive, got {0}")]
    Window(Tick),
}

impl Config {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        match cfg.default_suppress_window {
            Some(w) if w <= 0 => Err(ConfigError::Window(w)),
            _ => Ok(cfg),
        }
    }

    /// Read the optional config file, then apply the listen-address override
    /// from the environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read {
                    path: p.to_path_buf(),
                    source,
                })?;
                Self::from_toml(&text, p)?
            }
            None => Config::default(),
        };
        if let Ok(value) = std::env::var(LISTEN_ENV) {
            cfg.listen = value.parse().map_err(|_| ConfigError::Listen { value })?;
        }
        Ok(cfg)
    }
}
