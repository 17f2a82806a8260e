//! Kernel-wide configuration, stored as TOML.
//!
//! Every section and key is optional; missing values take their defaults.
//! `locokernel config` prints the full default file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::control::{CommandRanges, ControlConfig};
use crate::error::{Error, Result};
use crate::harness::{CriteriaMode, RandomizationRanges, RolloutConfig, StepperConfig};
use crate::observation::ObservationConfig;
use crate::reward::RewardConfig;
use crate::terrain::TerrainConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub criteria: CriteriaMode,
    /// m
    pub min_distance: f64,
    /// s
    pub duration: f64,
    /// Episodes per (terrain, level, speed) group.
    pub n: usize,
    /// Velocity sweep, m/s.
    pub speeds: Vec<f64>,
    /// Lateral terrain width, m.
    pub terrain_width: f64,
    pub randomize: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            criteria: CriteriaMode::FixedDistance,
            min_distance: 4.0,
            duration: 20.0,
            n: 100,
            speeds: (1..=10).map(|i| f64::from(i) / 10.0).collect(),
            terrain_width: 8.0,
            randomize: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelConfig {
    pub terrain: TerrainConfig,
    pub observation: ObservationConfig,
    pub control: ControlConfig,
    pub command: CommandRanges,
    pub reward: RewardConfig,
    pub stepper: StepperConfig,
    pub randomization: RandomizationRanges,
    pub eval: EvalConfig,
}

impl KernelConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: KernelConfig = toml::from_str(text).map_err(|e| Error::Parse {
            line: e
                .span()
                .map_or(0, |s| text[..s.start.min(text.len())].lines().count().max(1)),
            message: e.message().to_owned(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is always representable as TOML")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.control.geometry.validate()?;
        self.stepper.validate()?;
        if !(self.eval.duration > 0.0) {
            return Err(Error::Validation {
                field: "eval.duration".into(),
                message: format!("must be positive, got {}", self.eval.duration),
            });
        }
        if self.eval.n == 0 {
            return Err(Error::Validation {
                field: "eval.n".into(),
                message: "must be at least 1".into(),
            });
        }
        Ok(())
    }

    pub fn rollout(&self) -> RolloutConfig {
        RolloutConfig {
            control: self.control,
            stepper: self.stepper.clone(),
            observation: self.observation,
            reward: self.reward.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let cfg = KernelConfig::default();
        let text = cfg.to_toml();
        assert!(text.contains("[stepper]"));
        assert!(text.contains("base_clearance = 0.1"));
        assert_eq!(KernelConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg = KernelConfig::from_toml("[stepper]\ndt = 0.01\n").unwrap();
        assert_eq!(cfg.stepper.dt, 0.01);
        assert_eq!(cfg.control.kp, 40.0);
    }

    #[test]
    fn bad_values_rejected() {
        assert!(KernelConfig::from_toml("[stepper]\ndt = 0.0\n").is_err());
        assert!(matches!(
            KernelConfig::from_toml("[eval]\nn = \"lots\"\n"),
            Err(Error::Parse { line: 2, .. })
        ));
    }
}
