//! JSON configuration: scenario, learning loop and power model in one
//! document. Every field is optional; unknown keys are rejected.

use std::path::Path;

use sensopt_core::{AdaptiveConfig, Scenario};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Linear power model used for consumed-energy figures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerModel {
    /// Power drawn while sensing, watts.
    pub p_sense: f64,
    /// Power drawn during a handover, watts.
    pub p_ho: f64,
}

impl Default for PowerModel {
    fn default() -> Self {
        Self {
            p_sense: 1.0,
            p_ho: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub scenario: Scenario,
    pub adaptive: AdaptiveConfig,
    pub power: PowerModel,
}

impl ConfigFile {
    /// Parses and validates a JSON document. A `p_free` list whose length
    /// differs from `np` is truncated or extended with the scenario's
    /// extension rule.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let mut cfg: ConfigFile =
            serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if cfg.scenario.p_free.len() != cfg.scenario.np && !cfg.scenario.p_free.is_empty() {
            cfg.scenario = cfg.scenario.with_channel_count(cfg.scenario.np);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    /// Loads `path`, or the defaults when no file is given.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(Self::default()),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.scenario.validate().map_err(CliError::Core)?;
        self.adaptive.validate().map_err(CliError::Core)?;
        if !(self.power.p_sense > 0.0 && self.power.p_sense.is_finite()) {
            return Err(CliError::Config("power.p_sense must be positive".into()));
        }
        if !(self.power.p_ho >= 0.0 && self.power.p_ho.is_finite()) {
            return Err(CliError::Config("power.p_ho must be non-negative".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
