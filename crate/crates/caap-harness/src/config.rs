//! Declarative experiment configuration.
//!
//! Everything an experiment consumes lives in one TOML-serialisable struct
//! with the standard heterogeneous workload as its default, so a missing or
//! empty config file runs the documented reference experiment. Validation
//! reports the offending field path.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use caap_core::adversary::AttackScenario;
use caap_core::context::TraceConfig;
use caap_core::cost::{ChannelModelConfig, HardwareProfile};
use caap_core::optimizer::{OptimizerConfig, SelectorKind};
use caap_core::predictor::PredictorParams;
use caap_core::scenario;
use caap_core::Real;

/// How the selector's view of the next context is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PredictionMode {
    /// Displace the true next context by a seeded, ε-bounded error. The
    /// error magnitude is then an experiment parameter, which is what the
    /// stability claims are stated in terms of.
    #[default]
    InjectedError,
    /// Run the level/trend forecaster over the observed history.
    Filter,
}

/// Deep-fade burst overlay on the synthesised trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BurstConfig {
    pub start_s: Real,
    pub end_s: Real,
    pub target_snr_db: Real,
    pub target_per: Real,
}

impl Default for BurstConfig {
    fn default() -> Self {
        Self {
            start_s: scenario::BURST_WINDOW_S.0,
            end_s: scenario::BURST_WINDOW_S.1,
            target_snr_db: scenario::BURST_TARGET_SNR_DB,
            target_per: scenario::BURST_TARGET_PER,
        }
    }
}

fn default_runs() -> usize {
    200
}

fn default_epsilon() -> Real {
    0.05
}

fn default_selectors() -> Vec<SelectorKind> {
    vec![
        SelectorKind::ApmoeaRl,
        SelectorKind::ApmoeaNoRl,
        SelectorKind::StaticLattice,
        SelectorKind::StaticCode,
        SelectorKind::StaticHash,
    ]
}

fn default_eps_grid() -> Vec<Real> {
    vec![0.0, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30]
}

fn default_security_seeds() -> u64 {
    120
}

fn default_attack_scenarios() -> Vec<AttackScenario> {
    let mut scenarios = AttackScenario::PROTOCOL_SCENARIOS.to_vec();
    scenarios.push(AttackScenario::ContextManipulation(0.26));
    scenarios
}

fn default_hysteresis_scale() -> Real {
    1.0
}

fn default_lipschitz_samples() -> usize {
    4000
}

fn default_trace() -> TraceConfig {
    scenario::standard_trace_config(0)
}

fn default_burst() -> Option<BurstConfig> {
    Some(BurstConfig::default())
}

fn default_channel() -> ChannelModelConfig {
    scenario::nominal_channel()
}

fn default_hardware() -> HardwareProfile {
    scenario::vehicle_hardware()
}

fn default_optimizer() -> OptimizerConfig {
    OptimizerConfig::new(scenario::default_base_weights(), 0)
}

/// Full experiment description. All fields default to the standard
/// reference workload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Master seed; every trace, injection, and selector seed derives from
    /// it deterministically.
    pub master_seed: u64,
    /// Monte Carlo replications per selector.
    pub monte_carlo_runs: usize,
    /// Prediction-error magnitude of the main experiment (normalised L∞).
    pub epsilon: Real,
    pub prediction: PredictionMode,
    pub selectors: Vec<SelectorKind>,
    pub trace: TraceConfig,
    pub burst: Option<BurstConfig>,
    pub channel: ChannelModelConfig,
    pub hardware: HardwareProfile,
    pub optimizer: OptimizerConfig,
    pub predictor: PredictorParams,
    /// ε grid of the prediction-error sweep; strictly increasing.
    pub eps_grid: Vec<Real>,
    /// Attack scenarios the security suite runs; the default is the full
    /// failure-mode matrix plus a calibrated context manipulation.
    pub attack_scenarios: Vec<AttackScenario>,
    /// Seeds per attack scenario in the security suite.
    pub security_seeds: u64,
    /// Hysteresis bonus as a multiple of the estimated `K·ε` uncertainty
    /// scale of the experiment.
    pub hysteresis_scale: Real,
    /// Sample pairs for the loss Lipschitz estimate.
    pub lipschitz_samples: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            master_seed: 42,
            monte_carlo_runs: default_runs(),
            epsilon: default_epsilon(),
            prediction: PredictionMode::default(),
            selectors: default_selectors(),
            trace: default_trace(),
            burst: default_burst(),
            channel: default_channel(),
            hardware: default_hardware(),
            optimizer: default_optimizer(),
            predictor: PredictorParams::default(),
            eps_grid: default_eps_grid(),
            attack_scenarios: default_attack_scenarios(),
            security_seeds: default_security_seeds(),
            hysteresis_scale: default_hysteresis_scale(),
            lipschitz_samples: default_lipschitz_samples(),
        }
    }
}

#[derive(Debug, Error)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn new(path: &str, message: impl Into<String>) -> Self {
        Self {
            path: path.to_string(),
            message: message.into(),
        }
    }
}

impl ExperimentConfig {
    /// The documented reference workload with a chosen master seed.
    pub fn standard(master_seed: u64) -> Self {
        Self {
            master_seed,
            ..Default::default()
        }
    }

    /// Parse from TOML; an empty document is the standard config.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text)
            .map_err(|e| ConfigError::new("<config>", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.monte_carlo_runs == 0 {
            return Err(ConfigError::new(
                "monte_carlo_runs",
                "must be at least 1",
            ));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(ConfigError::new(
                "epsilon",
                "must be finite and non-negative",
            ));
        }
        if self.selectors.is_empty() {
            return Err(ConfigError::new("selectors", "must name at least one selector"));
        }
        self.trace
            .validate()
            .map_err(|e| ConfigError::new("trace", e.to_string()))?;
        if let Some(b) = &self.burst {
            if !(b.start_s >= 0.0 && b.end_s > b.start_s) {
                return Err(ConfigError::new(
                    "burst",
                    "window must satisfy 0 <= start_s < end_s",
                ));
            }
        }
        self.channel
            .validate()
            .map_err(|e| ConfigError::new("channel", e.to_string()))?;
        self.hardware
            .validate()
            .map_err(|e| ConfigError::new("hardware", e.to_string()))?;
        self.optimizer
            .validate()
            .map_err(|e| ConfigError::new("optimizer", e.to_string()))?;
        self.predictor
            .validate()
            .map_err(|e| ConfigError::new("predictor", e.to_string()))?;
        if self.eps_grid.is_empty() {
            return Err(ConfigError::new("eps_grid", "must contain at least one point"));
        }
        for (k, w) in self.eps_grid.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(ConfigError::new(
                    "eps_grid",
                    format!("must be strictly increasing (violated at index {})", k + 1),
                ));
            }
        }
        if self.eps_grid.iter().any(|e| !e.is_finite() || *e < 0.0) {
            return Err(ConfigError::new("eps_grid", "entries must be finite and >= 0"));
        }
        if self.security_seeds == 0 {
            return Err(ConfigError::new("security_seeds", "must be at least 1"));
        }
        if !(self.hysteresis_scale.is_finite() && self.hysteresis_scale >= 0.0) {
            return Err(ConfigError::new(
                "hysteresis_scale",
                "must be finite and non-negative",
            ));
        }
        if self.lipschitz_samples < 2 {
            return Err(ConfigError::new("lipschitz_samples", "must be at least 2"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_toml_is_the_standard_config() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.monte_carlo_runs, 200);
        assert_eq!(cfg.eps_grid.len(), 7);
    }

    #[test]
    fn toml_round_trip_preserves_the_config() {
        let cfg = ExperimentConfig::standard(7);
        let text = cfg.to_toml();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn validation_errors_carry_field_paths() {
        let cfg = ExperimentConfig {
            monte_carlo_runs: 0,
            ..Default::default()
        };
        assert_eq!(cfg.validate().unwrap_err().path, "monte_carlo_runs");

        let mut cfg = ExperimentConfig::default();
        cfg.trace.step_ms = 5;
        assert_eq!(cfg.validate().unwrap_err().path, "trace");

        let cfg = ExperimentConfig {
            eps_grid: vec![0.0, 0.0],
            ..Default::default()
        };
        let err = cfg.validate().unwrap_err();
        assert_eq!(err.path, "eps_grid");
        assert!(err.message.contains("index 1"));
    }

    #[test]
    fn overrides_parse_from_partial_toml() {
        let cfg = ExperimentConfig::from_toml(
            "master_seed = 9\nepsilon = 0.1\nselectors = [\"apmoea-rl\"]\n",
        )
        .unwrap();
        assert_eq!(cfg.master_seed, 9);
        assert_eq!(cfg.epsilon, 0.1);
        assert_eq!(cfg.selectors, vec![SelectorKind::ApmoeaRl]);
        assert_eq!(cfg.monte_carlo_runs, 200);
    }
}
