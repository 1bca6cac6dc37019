use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use super::{DispatchError, DispatchTable};

pub const DEFAULT_SHELLS: [&str; 3] = ["/bin/bash", "/bin/sh", "/bin/dash"];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config json: {0}")]
    Json(String),
    #[error(transparent)]
    Dispatch(#[from] DispatchError),
    #[error("{0}")]
    Invalid(String),
}

/// Inputs that steer trace translation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngineConfig {
    pub dispatch: DispatchTable,
    /// Shells whose absence from the trace triggers deny rules.
    pub shell_paths: Vec<String>,
    /// Substring of a cgroup path that marks a containerized process.
    pub container_cgroup_pattern: String,
    /// Prefix of a mount-namespace root inside the overlay filesystem.
    pub overlay_root_pattern: String,
    /// Name of the container profile; audit events are filtered by it.
    pub profile_name: String,
    pub host_profile_name: String,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            dispatch: DispatchTable::default(),
            shell_paths: DEFAULT_SHELLS.iter().map(|s| s.to_string()).collect(),
            container_cgroup_pattern: "/docker/".into(),
            overlay_root_pattern: "/var/lib/docker/overlay2/".into(),
            profile_name: "docker-container".into(),
            host_profile_name: "docker-host".into(),
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.shell_paths.is_empty() {
            return Err(ConfigError::Invalid("shell_paths must not be empty".into()));
        }
        if let Some(p) = self.shell_paths.iter().find(|p| !p.starts_with('/')) {
            return Err(ConfigError::Invalid(format!(
                "shell path {p:?} is not absolute"
            )));
        }
        if self.container_cgroup_pattern.is_empty() || self.overlay_root_pattern.is_empty() {
            return Err(ConfigError::Invalid(
                "layer patterns must not be empty".into(),
            ));
        }
        Ok(())
    }

    /// Load a JSON config. Missing keys take their defaults; `dispatch` is a
    /// path to a dispatch-table file, relative to the config file.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_json(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let raw: ConfigFile =
            serde_json::from_str(text).map_err(|e| ConfigError::Json(e.to_string()))?;
        let mut cfg = EngineConfig::default();
        if let Some(d) = raw.dispatch {
            let p = base_dir.join(d);
            let t = fs::read_to_string(&p).map_err(|source| ConfigError::Io { path: p, source })?;
            cfg.dispatch = DispatchTable::from_json(&t)?;
        }
        if let Some(v) = raw.shell_paths {
            cfg.shell_paths = v;
        }
        if let Some(v) = raw.container_cgroup_pattern {
            cfg.container_cgroup_pattern = v;
        }
        if let Some(v) = raw.overlay_root_pattern {
            cfg.overlay_root_pattern = v;
        }
        if let Some(v) = raw.profile_name {
            cfg.profile_name = v;
        }
        if let Some(v) = raw.host_profile_name {
            cfg.host_profile_name = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    dispatch: Option<PathBuf>,
    shell_paths: Option<Vec<String>>,
    container_cgroup_pattern: Option<String>,
    overlay_root_pattern: Option<String>,
    profile_name: Option<String>,
    host_profile_name: Option<String>,
}
