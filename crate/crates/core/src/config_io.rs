//! Reading and writing configuration files (TOML, keys = `SimConfig` fields).
//! Missing keys take their default value; unknown keys are rejected.

use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::model::{ConfigError, SimConfig};

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{}: file not found", path.display())]
    NotFound { path: PathBuf },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(#[from] ConfigError),
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
}

pub fn read_file(path: &Path) -> Result<String, LoadError> {
    std::fs::read_to_string(path).map_err(|source| match source.kind() {
        io::ErrorKind::NotFound => LoadError::NotFound { path: path.to_path_buf() },
        _ => LoadError::Io { path: path.to_path_buf(), source },
    })
}

/// Parses without validating.
pub fn parse_config_unchecked(text: &str) -> Result<SimConfig, LoadError> {
    toml::from_str(text).map_err(|e| LoadError::Parse(e.to_string()))
}

/// Parses and validates.
pub fn parse_config(text: &str) -> Result<SimConfig, LoadError> {
    let cfg = parse_config_unchecked(text)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<SimConfig, LoadError> {
    parse_config(&read_file(path)?)
}

pub fn config_to_toml(cfg: &SimConfig) -> String {
    toml::to_string(cfg).expect("SimConfig always serializes")
}
