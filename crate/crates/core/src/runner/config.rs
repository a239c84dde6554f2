use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::controllers::{ControllerName, ControllerSettings};
use crate::env::EnvConfig;
use crate::metrics::{ShiftParams, SummaryParams};
use crate::oracle::OracleSettings;
use crate::scalar::Real;
use crate::support::{AgentModel, SupportThresholds};
use crate::utility::UtilityConfig;

use super::RunError;

/// Default configuration shipped with the crate, with a comment on every value.
pub const DEFAULT_CONFIG_TOML: &str = include_str!("../../../../configs/default.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub trials: usize,
    pub seeds: Vec<u64>,
    pub controllers: Vec<ControllerName>,
    /// Leading trials excluded from metrics (they still train memory).
    pub burnin: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            trials: 50_000,
            seeds: (0..10).collect(),
            controllers: ControllerName::ALL.to_vec(),
            burnin: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningConfig<F> {
    pub alpha: F,
    pub epsilon: f64,
    /// Multiplicative per-trial decay of epsilon; 1 disables decay.
    pub epsilon_decay: f64,
    /// Learn from the net utility (including resolution cost) rather than the
    /// task payoff alone.
    pub reward_includes_resolution_cost: bool,
}

impl<F: Real> Default for LearningConfig<F> {
    fn default() -> Self {
        Self {
            alpha: F::lit(0.03),
            epsilon: 0.05,
            epsilon_decay: 1.0,
            reward_includes_resolution_cost: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig<F> {
    pub ece_bins: usize,
    pub shift_window: usize,
    pub recovery_delta: F,
    pub recovery_moving_average: usize,
}

impl<F: Real> Default for MetricsConfig<F> {
    fn default() -> Self {
        Self {
            ece_bins: 10,
            shift_window: 50,
            recovery_delta: F::lit(0.1),
            recovery_moving_average: 20,
        }
    }
}

impl<F: Real> MetricsConfig<F> {
    pub fn summary_params(&self) -> SummaryParams<F> {
        SummaryParams {
            ece_bins: self.ece_bins,
            shift: ShiftParams {
                window: self.shift_window,
                recovery_delta: self.recovery_delta,
                moving_average: self.recovery_moving_average,
            },
        }
    }
}

/// Full run configuration, one TOML section per component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[serde(bound = "F: Real")]
pub struct RunConfig<F = f64> {
    pub experiment: ExperimentConfig,
    pub env: EnvConfig<F>,
    pub utility: UtilityConfig<F>,
    pub support: SupportThresholds<F>,
    pub agent: AgentModel<F>,
    pub controllers: ControllerSettings,
    pub learning: LearningConfig<F>,
    pub metrics: MetricsConfig<F>,
    pub oracle: OracleSettings,
}

impl<F: Real> Default for RunConfig<F> {
    fn default() -> Self {
        Self {
            experiment: ExperimentConfig::default(),
            env: EnvConfig::default(),
            utility: UtilityConfig::default(),
            support: SupportThresholds::default(),
            agent: AgentModel::default(),
            controllers: ControllerSettings::default(),
            learning: LearningConfig::default(),
            metrics: MetricsConfig::default(),
            oracle: OracleSettings::default(),
        }
    }
}

impl<F: Real> RunConfig<F> {
    pub fn from_toml(text: &str) -> Result<Self, RunError> {
        let cfg: Self = toml::from_str(text).map_err(|e| RunError::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Loads `path`, or the shipped defaults when `path` is `default`.
    pub fn load(path: &Path) -> Result<Self, RunError> {
        if path.as_os_str() == "default" {
            return Self::from_toml(DEFAULT_CONFIG_TOML);
        }
        let text = std::fs::read_to_string(path).map_err(|source| RunError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), RunError> {
        self.env.validate()?;
        self.utility.validate()?;
        if self.experiment.trials == 0 {
            return Err(RunError::Config("trials must be at least 1".into()));
        }
        if self.experiment.seeds.is_empty() {
            return Err(RunError::Config("seed list must not be empty".into()));
        }
        let mut seeds = self.experiment.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.experiment.seeds.len() {
            return Err(RunError::Config("seeds must be distinct".into()));
        }
        if self.experiment.controllers.is_empty() {
            return Err(RunError::Config("controller list must not be empty".into()));
        }
        let l = &self.learning;
        if !(l.alpha > F::zero() && l.alpha <= F::one()) {
            return Err(RunError::Config("alpha must lie in (0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&l.epsilon) || !(0.0..=1.0).contains(&l.epsilon_decay) {
            return Err(RunError::Config("epsilon and epsilon_decay must lie in [0, 1]".into()));
        }
        if !(self.support.margin >= F::zero() && self.support.margin <= F::half()) {
            return Err(RunError::Config("support margin must lie in [0, 0.5]".into()));
        }
        if let Some(sd) = self.agent.assumed_sigma_b {
            if !(sd.is_finite() && sd > F::zero()) {
                return Err(RunError::Config("assumed_sigma_b must be positive".into()));
            }
        }
        if self.metrics.ece_bins == 0 {
            return Err(RunError::Config("ece_bins must be positive".into()));
        }
        Ok(())
    }
}
