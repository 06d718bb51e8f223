//! Experiment configuration files.
//!
//! A config is one JSON object with optional `model`, `seed` and `output`
//! keys and exactly one experiment block:
//!
//! ```json
//! { "model": "llama-7b", "seed": 7, "multiround": { "rounds": 30 } }
//! ```
//!
//! Units at this boundary are dBm, dB, Hz and TFLOPS.

use std::path::{Path, PathBuf};

use kvlink_core::scenario::{MultiRoundConfig, SingleRoundConfig};
use kvlink_core::static_e2e::{SweepAxis, SweepDefaults};
use kvlink_core::{ModelSpec, WorkloadConstants};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Named preset or explicit architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSource {
    Preset(String),
    Spec(ModelSpec),
}

impl Default for ModelSource {
    fn default() -> Self {
        ModelSource::Preset("llama-7b".into())
    }
}

impl ModelSource {
    pub fn resolve(&self) -> CliResult<ModelSpec> {
        match self {
            ModelSource::Preset(name) => {
                ModelSpec::preset(name).ok_or_else(|| CliError::UnknownPreset(name.clone()))
            }
            ModelSource::Spec(spec) => Ok(*spec),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatioSweep {
    pub axis: SweepAxis,
    /// Grid override; the axis default when absent.
    pub grid: Option<Vec<f64>>,
    pub defaults: SweepDefaults,
}

impl Default for RatioSweep {
    fn default() -> Self {
        Self {
            axis: SweepAxis::Snr,
            grid: None,
            defaults: SweepDefaults::default(),
        }
    }
}

impl RatioSweep {
    pub fn grid(&self) -> Vec<f64> {
        self.grid
            .clone()
            .unwrap_or_else(|| self.axis.default_grid())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Threshold {
    pub alpha: f64,
    pub xi: f64,
    pub theta_r: f64,
    pub gamma: f64,
    pub bits_per_token: f64,
    pub receiver_tflops: f64,
    pub snr_db: f64,
    pub bandwidth_hz: f64,
    /// Points of the `f(ρ)` curve.
    pub rho_points: usize,
    pub xi_grid: Vec<f64>,
    pub alpha_grid: Vec<f64>,
}

impl Default for Threshold {
    fn default() -> Self {
        Self {
            alpha: 1024.0,
            xi: 3072.0,
            theta_r: 5120.0,
            gamma: 2.0,
            bits_per_token: 16.0,
            receiver_tflops: 10.0,
            snr_db: 20.0,
            bandwidth_hz: 2e9,
            rho_points: 200,
            xi_grid: (0..=20).map(|i| 512.0 * i as f64).collect(),
            alpha_grid: (1..=16).map(|i| 256.0 * i as f64).collect(),
        }
    }
}

pub const DEFAULT_STRATEGIES: [&str; 5] = [
    "jmsra",
    "all-nl-uniform",
    "all-nl-opt",
    "all-kv-uniform",
    "all-kv-opt",
];

fn default_strategies() -> Vec<String> {
    DEFAULT_STRATEGIES.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SingleScenario {
    pub scenario: SingleRoundConfig,
    pub strategies: Vec<String>,
    pub delta: f64,
}

impl Default for SingleScenario {
    fn default() -> Self {
        Self {
            scenario: SingleRoundConfig::default(),
            strategies: default_strategies(),
            delta: kvlink_core::optimizer::DEFAULT_DELTA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sweep {
    pub scenario: SingleRoundConfig,
    pub grid: Vec<f64>,
    /// Instances per grid point; trial `t` uses seed `seed + t` at every
    /// grid point.
    pub trials: usize,
    pub strategies: Vec<String>,
    pub delta: f64,
}

impl Sweep {
    pub fn bandwidth() -> Self {
        Self {
            grid: (0..8).map(|i| 0.5e9 + 0.5e9 * i as f64).collect(),
            ..Self::agents()
        }
    }

    pub fn agents() -> Self {
        Self {
            scenario: SingleRoundConfig::default(),
            grid: (1..=6).map(|i| 5.0 * i as f64).collect(),
            trials: 10,
            strategies: default_strategies(),
            delta: kvlink_core::optimizer::DEFAULT_DELTA,
        }
    }
}

impl Default for Sweep {
    fn default() -> Self {
        Self::agents()
    }
}

/// Multi-round policy names as used on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Jmsra,
    #[value(name = "all_nl", alias = "all-nl")]
    AllNl,
    #[value(name = "all_kv", alias = "all-kv")]
    AllKv,
}

impl Policy {
    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Jmsra => "jmsra",
            Policy::AllNl => "all_nl",
            Policy::AllKv => "all_kv",
        }
    }

    /// Registry entry; forced policies keep the optimized split.
    pub fn strategy_name(self) -> &'static str {
        match self {
            Policy::Jmsra => "jmsra",
            Policy::AllNl => "all-nl-opt",
            Policy::AllKv => "all-kv-opt",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Multiround {
    pub scenario: MultiRoundConfig,
    pub rounds: u32,
    pub policies: Vec<Policy>,
}

impl Default for Multiround {
    fn default() -> Self {
        Self {
            scenario: MultiRoundConfig::default(),
            rounds: 30,
            policies: vec![Policy::Jmsra, Policy::AllNl, Policy::AllKv],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    RatioSweep(RatioSweep),
    Threshold(Threshold),
    SingleScenario(SingleScenario),
    BandwidthSweep(Sweep),
    AgentSweep(Sweep),
    Multiround(Multiround),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::RatioSweep(_) => "ratio_sweep",
            Experiment::Threshold(_) => "threshold",
            Experiment::SingleScenario(_) => "single_scenario",
            Experiment::BandwidthSweep(_) => "bandwidth_sweep",
            Experiment::AgentSweep(_) => "agent_sweep",
            Experiment::Multiround(_) => "multiround",
        }
    }

    pub fn is_stochastic(&self) -> bool {
        !matches!(self, Experiment::RatioSweep(_) | Experiment::Threshold(_))
    }
}

/// Fully resolved experiment description; also the sidecar payload.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub model: ModelSource,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    #[serde(flatten)]
    pub experiment: Experiment,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    model: ModelSource,
    seed: Option<u64>,
    output: Option<PathBuf>,
    ratio_sweep: Option<RatioSweep>,
    threshold: Option<Threshold>,
    single_scenario: Option<SingleScenario>,
    bandwidth_sweep: Option<Sweep>,
    agent_sweep: Option<Sweep>,
    multiround: Option<Multiround>,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            model: ModelSource::default(),
            seed: None,
            output: None,
            experiment,
        }
    }

    pub fn parse(text: &str, path: &Path) -> CliResult<Self> {
        let err = |reason: String| CliError::Config {
            path: path.to_path_buf(),
            reason,
        };
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| err(e.to_string()))?;
        let mut blocks = Vec::new();
        if let Some(b) = raw.ratio_sweep {
            blocks.push(Experiment::RatioSweep(b));
        }
        if let Some(b) = raw.threshold {
            blocks.push(Experiment::Threshold(b));
        }
        if let Some(b) = raw.single_scenario {
            blocks.push(Experiment::SingleScenario(b));
        }
        if let Some(b) = raw.bandwidth_sweep {
            blocks.push(Experiment::BandwidthSweep(b));
        }
        if let Some(b) = raw.agent_sweep {
            blocks.push(Experiment::AgentSweep(b));
        }
        if let Some(b) = raw.multiround {
            blocks.push(Experiment::Multiround(b));
        }
        if blocks.len() != 1 {
            return Err(err(format!(
                "expected exactly one experiment block, found {}",
                blocks.len()
            )));
        }
        Ok(Self {
            model: raw.model,
            seed: raw.seed,
            output: raw.output,
            experiment: blocks.pop().expect("one block"),
        })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Self::parse(&text, path)
    }

    pub fn constants(&self) -> CliResult<WorkloadConstants> {
        Ok(self.model.resolve()?.constants())
    }

    /// Seed of a stochastic experiment.
    pub fn require_seed(&self) -> CliResult<u64> {
        self.seed.ok_or_else(|| {
            CliError::Invalid(format!(
                "{} needs a seed (--seed or \"seed\")",
                self.experiment.kind()
            ))
        })
    }
}
