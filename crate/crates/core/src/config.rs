//! Simulation run configuration.
//!
//! Every field has a default matching the reference testbed: a 128-node
//! cluster, a 10-second scheduling tick, a 32-node per-job cap, a 10%
//! malleability threshold, and 100/340 W idle/loaded node draw. Files are
//! TOML documents with one section per concern; absent fields fall back to
//! the defaults.

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::reconfig::OverheadParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("config field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    pub total_nodes: u32,
    /// Largest node count any single job may use.
    pub max_nodes_per_job: u32,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            total_nodes: 128,
            max_nodes_per_job: 32,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SchedulerConfig {
    pub tick_interval_s: f64,
    /// Policy switch: with this off, malleable jobs never evaluate resize
    /// decisions and behave like their non-malleable counterparts.
    pub enable_malleability: bool,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            tick_interval_s: 10.0,
            enable_malleability: true,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyConfig {
    pub idle_watts: f64,
    pub loaded_watts: f64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            idle_watts: 100.0,
            loaded_watts: 340.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct MalleabilityConfig {
    pub threshold_pct: f64,
}

impl Default for MalleabilityConfig {
    fn default() -> Self {
        Self { threshold_pct: 10.0 }
    }
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ProfilesConfig {
    /// Extra profile files loaded on top of the built-in four.
    pub paths: Vec<std::path::PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub cluster: ClusterConfig,
    pub scheduler: SchedulerConfig,
    pub overheads: OverheadParams,
    pub energy: EnergyConfig,
    pub malleability: MalleabilityConfig,
    pub profiles: ProfilesConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |field: &str, reason: &str| {
            Err(ConfigError::Invalid {
                field: field.into(),
                reason: reason.into(),
            })
        };
        if self.cluster.total_nodes == 0 {
            return invalid("cluster.total_nodes", "must be >= 1");
        }
        if self.cluster.max_nodes_per_job == 0
            || self.cluster.max_nodes_per_job > self.cluster.total_nodes
        {
            return invalid(
                "cluster.max_nodes_per_job",
                "must be between 1 and cluster.total_nodes",
            );
        }
        if !(self.scheduler.tick_interval_s > 0.0) {
            return invalid("scheduler.tick_interval_s", "must be > 0");
        }
        if !(self.overheads.bandwidth_bytes_per_s > 0.0) {
            return invalid("overheads.bandwidth_bytes_per_s", "must be > 0");
        }
        for (field, value) in [
            ("overheads.spawn_base_s", self.overheads.spawn_base_s),
            ("overheads.spawn_per_proc_s", self.overheads.spawn_per_proc_s),
            (
                "overheads.latency_s_per_transfer",
                self.overheads.latency_s_per_transfer,
            ),
            ("energy.idle_watts", self.energy.idle_watts),
            ("energy.loaded_watts", self.energy.loaded_watts),
        ] {
            if !value.is_finite() || value < 0.0 {
                return invalid(field, "must be finite and >= 0");
            }
        }
        if !(self.malleability.threshold_pct > 0.0) {
            return invalid("malleability.threshold_pct", "must be > 0");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_testbed() {
        let config = RunConfig::default();
        assert_eq!(config.cluster.total_nodes, 128);
        assert_eq!(config.cluster.max_nodes_per_job, 32);
        assert_eq!(config.scheduler.tick_interval_s, 10.0);
        assert_eq!(config.energy.idle_watts, 100.0);
        assert_eq!(config.energy.loaded_watts, 340.0);
        assert_eq!(config.malleability.threshold_pct, 10.0);
        assert!(config.validate().is_ok());
    }

    #[test]
    fn partial_file_overrides_only_named_fields() {
        let config = RunConfig::from_toml_str(
            "[cluster]\ntotal_nodes = 64\n\n[overheads]\nspawn_base_s = 0.5\n",
        )
        .unwrap();
        assert_eq!(config.cluster.total_nodes, 64);
        assert_eq!(config.overheads.spawn_base_s, 0.5);
        assert_eq!(config.scheduler.tick_interval_s, 10.0);
    }

    #[test]
    fn cap_above_cluster_size_is_rejected() {
        let err = RunConfig::from_toml_str("[cluster]\ntotal_nodes = 16\nmax_nodes_per_job = 32\n")
            .unwrap_err();
        assert!(err.to_string().contains("max_nodes_per_job"), "{err}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(RunConfig::from_toml_str("[cluster]\nbogus = 1\n").is_err());
    }
}
