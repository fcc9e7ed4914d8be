//! Experiment configuration files.
//!
//! A config is TOML. Any key may be omitted; missing keys take the defaults of
//! the experiment kind. Unknown keys are rejected.

use std::path::Path;

use sha2::{Digest, Sha256};
use smoothconf_core::{ExperimentConfig, ExperimentKind};

use crate::error::{CliError, CliResult};

/// Which runner a config is meant for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Timeseries,
    Spatial,
    Application,
}

impl Family {
    fn default_kind(self) -> ExperimentKind {
        match self {
            Family::Timeseries => ExperimentKind::Timeseries1,
            Family::Spatial => ExperimentKind::Spatial,
            Family::Application => ExperimentKind::Application,
        }
    }

    fn admits(self, kind: ExperimentKind) -> bool {
        use ExperimentKind::*;
        match self {
            Family::Timeseries => matches!(kind, Timeseries1 | Timeseries2 | Timeseries3),
            Family::Spatial => kind == Spatial,
            Family::Application => kind == Application,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    /// SHA-256 of the effective configuration.
    pub digest: String,
}

pub fn load_config(path: &Path, family: Family, seed: Option<u64>) -> CliResult<LoadedConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text, family, seed).map_err(|e| match e {
        CliError::Usage(m) => CliError::Usage(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_config(text: &str, family: Family, seed: Option<u64>) -> CliResult<LoadedConfig> {
    let user: toml::Table = toml::from_str(text).map_err(|e| CliError::Usage(format!("malformed config: {e}")))?;
    let kind = match user.get("kind") {
        Some(v) => v
            .clone()
            .try_into::<ExperimentKind>()
            .map_err(|e| CliError::Usage(format!("invalid kind: {e}")))?,
        None => family.default_kind(),
    };
    if !family.admits(kind) {
        return Err(CliError::Usage(format!("kind {kind:?} does not match this experiment")));
    }
    let mut merged = toml::Table::try_from(ExperimentConfig::new(kind))
        .map_err(|e| CliError::Usage(format!("cannot render defaults: {e}")))?;
    merge(&mut merged, user);
    let mut config: ExperimentConfig = toml::Value::Table(merged)
        .try_into()
        .map_err(|e| CliError::Usage(format!("malformed config: {e}")))?;
    if let Some(seed) = seed {
        config.base_seed = seed;
    }
    config.validate()?;
    let digest = digest(&config)?;
    Ok(LoadedConfig { config, digest })
}

/// Overlays `user` onto `base`, recursing into tables.
fn merge(base: &mut toml::Table, user: toml::Table) {
    for (k, v) in user {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(u)) => merge(b, u),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Hex SHA-256 of the configuration rendered as JSON with sorted keys.
pub fn digest(config: &ExperimentConfig) -> CliResult<String> {
    let value = serde_json::to_value(config).map_err(|e| CliError::Usage(e.to_string()))?;
    let canonical = serde_json::to_string(&value).map_err(|e| CliError::Usage(e.to_string()))?;
    let hash = Sha256::digest(canonical.as_bytes());
    Ok(hash.iter().map(|b| format!("{b:02x}")).collect())
}
