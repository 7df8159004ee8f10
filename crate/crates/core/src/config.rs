//! Run configuration read from TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::decode::DecodeConfig;
use crate::error::{Error, Result};
use crate::nn::PolicyArch;
use crate::operators::OperatorKind;
use crate::ppo::PpoConfig;
use crate::routing::{RoutingConfig, RoutingVariant, SabreConfig};
use crate::synth::{CurriculumConfig, RewardConfig};
use crate::train::{Precision, TrainConfig};

/// What an agent is trained to do.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Permutation,
    Linear,
    Clifford,
    Routing,
}

impl Task {
    pub fn operator_kind(self) -> Option<OperatorKind> {
        match self {
            Task::Permutation => Some(OperatorKind::Permutation),
            Task::Linear => Some(OperatorKind::Linear),
            Task::Clifford => Some(OperatorKind::Clifford),
            Task::Routing => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Permutation => "permutation",
            Task::Linear => "linear",
            Task::Clifford => "clifford",
            Task::Routing => "routing",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSection {
    pub task: Task,
    /// Registered coupling map name.
    pub topology: String,
    /// Episode step limit for synthesis; `None` uses the register default.
    #[serde(default)]
    pub max_steps: Option<usize>,
    #[serde(default)]
    pub reward: RewardConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchSection {
    /// Convolution filters; 0 disables the convolution.
    pub conv_filters: usize,
    pub kernel: usize,
    pub hidden: Vec<usize>,
}

impl Default for ArchSection {
    fn default() -> Self {
        ArchSection { conv_filters: 32, kernel: 3, hidden: vec![512, 256] }
    }
}

impl ArchSection {
    pub fn build(&self, input: [usize; 3], n_actions: usize) -> PolicyArch {
        PolicyArch {
            input,
            conv_filters: self.conv_filters,
            kernel: self.kernel,
            hidden: self.hidden.clone(),
            n_actions,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoutingSection {
    pub variant: RoutingVariant,
    pub horizon: usize,
    pub max_active_swaps: usize,
    pub success_reward: f64,
    pub cx_unit_cost: f64,
    pub depth_cost: f64,
    pub target_layers: usize,
    /// Forward and backward passes per routing run.
    pub iterations: usize,
    /// Wall-clock budget per circuit for repeated runs.
    pub budget_seconds: Option<f64>,
    pub max_runs: usize,
    pub seed: u64,
    pub sabre: SabreConfig,
}

impl Default for RoutingSection {
    fn default() -> Self {
        let env = RoutingConfig::default();
        RoutingSection {
            variant: RoutingVariant::Fixed,
            horizon: env.horizon,
            max_active_swaps: env.max_active_swaps,
            success_reward: env.success_reward,
            cx_unit_cost: env.cx_unit_cost,
            depth_cost: env.depth_cost,
            target_layers: env.target_layers,
            iterations: 1,
            budget_seconds: None,
            max_runs: 1,
            seed: 0,
            sabre: SabreConfig::default(),
        }
    }
}

impl RoutingSection {
    pub fn env_config(&self) -> RoutingConfig {
        RoutingConfig {
            horizon: self.horizon,
            max_active_swaps: self.max_active_swaps,
            success_reward: self.success_reward,
            cx_unit_cost: self.cx_unit_cost,
            depth_cost: self.depth_cost,
            target_layers: self.target_layers,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.env_config().validate()?;
        self.sabre.validate()?;
        if self.iterations == 0 {
            return Err(Error::config("routing.iterations", "must be at least 1"));
        }
        if self.max_runs == 0 {
            return Err(Error::config("routing.max_runs", "must be at least 1"));
        }
        if let Some(b) = self.budget_seconds {
            if !(b.is_finite() && b >= 0.0) {
                return Err(Error::config("routing.budget_seconds", "must be finite and non-negative"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Oracle,
    SabreLite,
    Rl,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Oracle => "oracle",
            Algorithm::SabreLite => "sabre_lite",
            Algorithm::Rl => "rl",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchCase {
    pub topology: String,
    pub task: Task,
    pub algorithms: Vec<Algorithm>,
    /// Run counts for the learned algorithm.
    #[serde(default = "default_runs")]
    pub runs: Vec<usize>,
    /// Required when `algorithms` contains `rl`.
    #[serde(default)]
    pub checkpoint: Option<String>,
    /// Overrides the suite target count.
    #[serde(default)]
    pub targets: Option<usize>,
    /// Layers of the random routing circuits.
    #[serde(default = "default_layers")]
    pub layers: usize,
}

fn default_runs() -> Vec<usize> {
    vec![1]
}

fn default_layers() -> usize {
    3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    /// Master seed for target generation and decoding.
    pub seed: u64,
    pub targets: usize,
    pub cases: Vec<BenchCase>,
}

impl Default for BenchSection {
    fn default() -> Self {
        BenchSection { seed: 0, targets: 100, cases: Vec::new() }
    }
}

impl BenchSection {
    pub fn validate(&self) -> Result<()> {
        if self.targets == 0 {
            return Err(Error::config("bench.targets", "must be at least 1"));
        }
        for (i, c) in self.cases.iter().enumerate() {
            let at = |k: &str| format!("bench.cases[{i}].{k}");
            if c.algorithms.is_empty() {
                return Err(Error::config(at("algorithms"), "must not be empty"));
            }
            if c.runs.is_empty() || c.runs.contains(&0) {
                return Err(Error::config(at("runs"), "must be a non-empty list of positive counts"));
            }
            if c.targets == Some(0) {
                return Err(Error::config(at("targets"), "must be at least 1"));
            }
            if c.layers == 0 {
                return Err(Error::config(at("layers"), "must be at least 1"));
            }
            if c.algorithms.contains(&Algorithm::Rl) && c.checkpoint.is_none() {
                return Err(Error::config(at("checkpoint"), "required for the rl algorithm"));
            }
            if c.algorithms.contains(&Algorithm::SabreLite) && c.task != Task::Routing {
                return Err(Error::config(at("algorithms"), "sabre_lite only applies to routing"));
            }
        }
        Ok(())
    }
}

/// A benchmark suite file: a `[bench]` table, optionally inside a full run
/// configuration whose other sections are ignored.
pub fn parse_suite(text: &str) -> Result<BenchSection> {
    let doc: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::config("suite", e.message().to_string()))?;
    let bench = doc.get("bench").cloned().ok_or_else(|| Error::config("bench", "missing [bench] table"))?;
    let section: BenchSection = serde_path_to_error::deserialize(bench)
        .map_err(|e| Error::config(format!("bench.{}", e.path()), e.into_inner().to_string()))?;
    section.validate()?;
    Ok(section)
}

/// A complete run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub precision: Precision,
    #[serde(default)]
    pub deterministic: bool,
    /// Stop this many log rows after converging at the last difficulty.
    #[serde(default)]
    pub stop_after_converged: Option<usize>,
    pub env: EnvSection,
    #[serde(default)]
    pub arch: ArchSection,
    #[serde(default)]
    pub ppo: PpoConfig,
    #[serde(default)]
    pub curriculum: CurriculumConfig,
    #[serde(default)]
    pub decode: DecodeConfig,
    #[serde(default)]
    pub routing: RoutingSection,
    #[serde(default)]
    pub bench: BenchSection,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        let de = toml::Deserializer::new(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let msg = inner.message().to_string();
            let msg = match inner.span() {
                Some(span) => {
                    let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
                    format!("{msg} (line {line})")
                }
                None => msg,
            };
            Error::config(path, msg)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<RunConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), format!("cannot read: {e}")))?;
        RunConfig::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        crate::topology::topology(&self.env.topology)?;
        self.env.reward.validate()?;
        if self.env.max_steps == Some(0) {
            return Err(Error::config("env.max_steps", "must be at least 1"));
        }
        self.ppo.validate()?;
        self.curriculum.validate()?;
        self.decode.validate()?;
        self.routing.validate()?;
        self.bench.validate()?;
        if self.arch.hidden.contains(&0) {
            return Err(Error::config("arch.hidden", "layer widths must be positive"));
        }
        if self.arch.conv_filters > 0 && self.arch.kernel.is_multiple_of(2) {
            return Err(Error::config("arch.kernel", "must be odd"));
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            ppo: self.ppo,
            curriculum: self.curriculum,
            seed: self.seed,
            precision: self.precision,
            deterministic: self.deterministic,
            stop_after_converged: self.stop_after_converged,
        }
    }
}
