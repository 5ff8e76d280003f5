//! Experiment and sweep configuration (JSON, unknown keys rejected).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::AgentConfig;
use crate::bidlog::LogGenParams;
use crate::env::{AdoptionModelParams, LogSharing};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentMode {
    /// Dropout-Thompson network trained online.
    Learned,
    /// Uniform draw from the demand simplex every round; no learning.
    RandomDemand,
    /// Recommends each unit's latent demand. Debug baseline with zero regret.
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BasisSpec {
    /// `A = I`, so the latent demand equals the mixing vector.
    Identity,
    /// `m` simplex columns drawn once per seed and shared by all units.
    Random { m: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LogSpec {
    /// Load a saved log instead of generating one.
    pub path: Option<PathBuf>,
    pub generate: LogGenParams,
    /// Generation seed; the experiment seed when absent.
    pub seed: Option<u64>,
    pub sharing: LogSharing,
}

impl Default for LogSpec {
    fn default() -> Self {
        Self {
            path: None,
            generate: LogGenParams::with_impressions(5_000),
            seed: None,
            sharing: LogSharing::Shared,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Arm label used in output file names.
    pub name: String,
    pub rounds: usize,
    pub n_units: usize,
    pub budget_range: (f64, f64),
    pub basis: BasisSpec,
    pub dropout_rate: f64,
    pub agent_mode: AgentMode,
    /// Hide `A` and `c` from the agent.
    pub ablate_demand_info: bool,
    pub adoption: AdoptionModelParams,
    pub log: LogSpec,
    pub agent: AgentConfig,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            rounds: 2000,
            n_units: 200,
            budget_range: (100.0, 400.0),
            basis: BasisSpec::Identity,
            dropout_rate: 0.4,
            agent_mode: AgentMode::Learned,
            ablate_demand_info: false,
            adoption: AdoptionModelParams::default(),
            log: LogSpec::default(),
            agent: AgentConfig::default(),
            seed: 0,
            out_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::Config("rounds must be at least 1".into()));
        }
        if self.n_units == 0 {
            return Err(Error::Config("n_units must be at least 1".into()));
        }
        let (lo, hi) = self.budget_range;
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
            return Err(Error::Config(format!(
                "budget_range must satisfy 0 < lo <= hi, got ({lo}, {hi})"
            )));
        }
        if let BasisSpec::Random { m: 0 } = self.basis {
            return Err(Error::Config("random basis needs m >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout_rate must lie in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::Config(format!("invalid arm name `{}`", self.name)));
        }
        self.adoption.validate()?;
        self.agent.validate()?;
        match &self.log.path {
            Some(path) if !path.exists() => Err(Error::Config(format!(
                "log file {} does not exist",
                path.display()
            ))),
            Some(_) => Ok(()),
            None => self.log.generate.validate(),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("experiment config: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }
}

/// Overrides that turn the base configuration into one sweep arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmSpec {
    pub name: String,
    pub agent_mode: AgentMode,
    #[serde(default)]
    pub dropout_rate: Option<f64>,
    #[serde(default)]
    pub ablate_demand_info: bool,
}

impl ArmSpec {
    pub fn learned(name: &str, dropout_rate: f64) -> Self {
        Self {
            name: name.into(),
            agent_mode: AgentMode::Learned,
            dropout_rate: Some(dropout_rate),
            ablate_demand_info: false,
        }
    }

    pub fn apply(&self, base: &ExperimentConfig) -> ExperimentConfig {
        ExperimentConfig {
            name: self.name.clone(),
            agent_mode: self.agent_mode,
            dropout_rate: self.dropout_rate.unwrap_or(base.dropout_rate),
            ablate_demand_info: self.ablate_demand_info,
            ..base.clone()
        }
    }
}

/// The comparison arms: random demand, no dropout, four dropout rates and the 40%
/// arm without demand-related features.
pub fn default_arms() -> Vec<ArmSpec> {
    vec![
        ArmSpec {
            name: "random".into(),
            agent_mode: AgentMode::RandomDemand,
            dropout_rate: None,
            ablate_demand_info: false,
        },
        ArmSpec::learned("no_dropout", 0.0),
        ArmSpec::learned("dropout_20", 0.2),
        ArmSpec::learned("dropout_40", 0.4),
        ArmSpec::learned("dropout_60", 0.6),
        ArmSpec::learned("dropout_80", 0.8),
        ArmSpec {
            name: "dropout_40_no_demand_info".into(),
            agent_mode: AgentMode::Learned,
            dropout_rate: Some(0.4),
            ablate_demand_info: true,
        },
    ]
}

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub base: ExperimentConfig,
    #[serde(default = "default_arms")]
    pub arms: Vec<ArmSpec>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            base: ExperimentConfig::default(),
            arms: default_arms(),
            seeds: default_seeds(),
            out_dir: None,
        }
    }
}

impl SweepConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("sweep config: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    /// One experiment configuration per arm.
    pub fn arm_configs(&self) -> Vec<ExperimentConfig> {
        self.arms.iter().map(|arm| arm.apply(&self.base)).collect()
    }
}
