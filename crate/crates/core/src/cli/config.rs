//! Run configuration files (TOML or JSON) and their canonical hash.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rules::TypeRule;
use crate::sim::{Colors, SimConfig, SnapshotSchedule};
use crate::structure::{CommunityStructure, StructureConfig};

/// Structure fields plus the simulation settings. Every field is optional
/// so command line flags can fill in or override.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub structure: StructureConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<String>,
    #[serde(default, alias = "T", skip_serializing_if = "Option::is_none")]
    pub steps: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub colors: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classifier: Option<String>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let is_json = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        }
    }

    pub fn structure(&self) -> Result<CommunityStructure> {
        self.structure.build()
    }

    pub fn rule(&self) -> Result<TypeRule> {
        self.rule
            .as_deref()
            .ok_or_else(|| Error::Config("missing `rule`".into()))?
            .parse()
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        let steps = self
            .steps
            .ok_or_else(|| Error::Config("missing `steps` (or `T`)".into()))?;
        let mut cfg = SimConfig::new(
            self.rule()?,
            self.structure()?,
            steps,
            self.seed.unwrap_or(0),
        );
        if let Some(c) = &self.colors {
            cfg.colors = c.parse::<Colors>()?;
        }
        if let Some(s) = &self.snapshot {
            cfg.snapshot = s.parse::<SnapshotSchedule>()?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn hash(&self) -> String {
        config_hash(self)
    }
}

/// SHA-256 of the canonical (key-sorted, compact) JSON form.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let canonical = serde_json::to_value(value)
        .map(|v| v.to_string())
        .unwrap_or_default();
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
