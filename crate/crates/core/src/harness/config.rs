use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::{make_low_connectivity_maze, reference_maze, EnvSpec};
use crate::error::{Error, Result};
use crate::hybrid::HybridConfig;
use crate::interaction::TesterSpec;
use crate::metalearn::{EvalContext, MetaParamGrid};
use crate::quantum::DhConfig;
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    VerifyOracle,
    Explore,
    Learn,
    Metalearn,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::VerifyOracle => "verify_oracle",
            ExperimentKind::Explore => "explore",
            ExperimentKind::Learn => "learn",
            ExperimentKind::Metalearn => "metalearn",
        }
    }
}

/// Either a number of seeds derived from the master seed, or explicit seeds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    Count(u64),
    List(Vec<u64>),
}

impl Default for SeedSpec {
    fn default() -> Self {
        SeedSpec::Count(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentParams {
    pub gamma: f64,
    pub eta: f64,
}

impl Default for AgentParams {
    fn default() -> Self {
        Self { gamma: 0.0, eta: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExploreParams {
    /// Quantum exploration budget in interaction steps; defaults to
    /// `2M * ceil(8 sqrt N)`.
    pub budget: Option<u64>,
    /// Cap on classical trials; defaults to `64 N`.
    pub classical_cap: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnParams {
    /// Shared budget per arm; defaults to `2M * ceil(8 sqrt N) + M * exploit_epochs`.
    pub total_steps: Option<u64>,
    pub exploit_epochs: u64,
    pub tester: TesterSpec,
    pub hybrid: HybridConfig,
}

impl Default for LearnParams {
    fn default() -> Self {
        Self {
            total_steps: None,
            exploit_epochs: 200,
            tester: TesterSpec::LastEpochs(200),
            hybrid: HybridConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetaMethod {
    Grid,
    Unimodal,
    Quantum,
}

impl MetaMethod {
    pub fn name(self) -> &'static str {
        match self {
            MetaMethod::Grid => "grid",
            MetaMethod::Unimodal => "unimodal",
            MetaMethod::Quantum => "quantum",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetalearnParams {
    pub methods: Vec<MetaMethod>,
    pub grid: MetaParamGrid,
    pub eval: EvalContext,
    pub dh: DhConfig,
    /// Eval-register bins for the superposed state summary.
    pub bins: usize,
}

impl Default for MetalearnParams {
    fn default() -> Self {
        Self {
            methods: vec![MetaMethod::Grid, MetaMethod::Unimodal, MetaMethod::Quantum],
            grid: MetaParamGrid::default_16x8(),
            eval: EvalContext::default(),
            dh: DhConfig::default(),
            bins: 16,
        }
    }
}

/// One experiment, as read from TOML.
///
/// `maze` is a path relative to the config file, or `builtin:reference` /
/// `builtin:corridor-<m>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub maze: String,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub seeds: SeedSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub agent: AgentParams,
    #[serde(default)]
    pub explore: ExploreParams,
    #[serde(default)]
    pub learn: LearnParams,
    #[serde(default)]
    pub metalearn: MetalearnParams,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, maze: impl Into<String>) -> Self {
        Self {
            kind,
            maze: maze.into(),
            master_seed: 0,
            seeds: SeedSpec::default(),
            workers: None,
            output: None,
            agent: AgentParams::default(),
            explore: ExploreParams::default(),
            learn: LearnParams::default(),
            metalearn: MetalearnParams::default(),
            base_dir: PathBuf::from("."),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text)?;
        cfg.base_dir = PathBuf::from(".");
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Directory that relative paths are resolved against.
    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn with_base_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.base_dir = dir.into();
        self
    }

    pub fn validate(&self) -> Result<()> {
        match &self.seeds {
            SeedSpec::Count(0) => return Err(Error::config("seeds", "need at least one seed")),
            SeedSpec::List(l) if l.is_empty() => return Err(Error::config("seeds", "need at least one seed")),
            _ => {}
        }
        if self.workers == Some(0) {
            return Err(Error::config("workers", "must be positive"));
        }
        for (field, v) in [("agent.gamma", self.agent.gamma), ("agent.eta", self.agent.eta)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(field, format!("{v} is outside [0, 1]")));
            }
        }
        if self.explore.budget == Some(0) {
            return Err(Error::config("explore.budget", "must be positive"));
        }
        if self.learn.total_steps == Some(0) {
            return Err(Error::config("learn.total_steps", "must be positive"));
        }
        if self.learn.exploit_epochs == 0 {
            return Err(Error::config("learn.exploit_epochs", "must be positive"));
        }
        self.learn.hybrid.validate()?;
        let meta = &self.metalearn;
        meta.grid.validate()?;
        if meta.methods.is_empty() {
            return Err(Error::config("metalearn.methods", "need at least one method"));
        }
        if meta.bins == 0 {
            return Err(Error::config("metalearn.bins", "must be positive"));
        }
        if meta.eval.seeds.replicates == 0 {
            return Err(Error::config("metalearn.eval.seeds.replicates", "must be positive"));
        }
        if meta.dh.c_dh <= 0.0 {
            return Err(Error::config("metalearn.dh.c_dh", "must be positive"));
        }
        Ok(())
    }

    /// Run seeds. A count expands to `derive_seed(master_seed, 0, i)`.
    pub fn seed_list(&self) -> Vec<u64> {
        match &self.seeds {
            SeedSpec::Count(n) => (0..*n).map(|i| derive_seed(self.master_seed, 0, i)).collect(),
            SeedSpec::List(l) => l.clone(),
        }
    }

    pub fn load_maze(&self) -> Result<EnvSpec> {
        if let Some(name) = self.maze.strip_prefix("builtin:") {
            if name == "reference" {
                return Ok(reference_maze());
            }
            let m = name
                .strip_prefix("corridor-")
                .and_then(|m| m.parse::<usize>().ok())
                .filter(|m| (1..=12).contains(m))
                .ok_or_else(|| Error::config("maze", format!("unknown builtin `{name}`")))?;
            return Ok(make_low_connectivity_maze(m));
        }
        EnvSpec::load(self.base_dir.join(&self.maze))
    }
}
