use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::agents::HyperParams;
use crate::env::{ChronicProfile, EnvParams, CHRONIC_LENGTH};
use crate::grid::OverloadParams;
use crate::marl::{HierarchyConfig, Strategy, TrainSchedule};

/// Environment variable naming the root under which relative output paths live.
pub const OUTPUT_ENV: &str = "GRID_MARL_OUTPUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileName {
    Calm,
    Default,
    #[default]
    Stressed,
}

impl ProfileName {
    pub fn profile(self) -> ChronicProfile {
        match self {
            ProfileName::Calm => ChronicProfile::default().calm(),
            ProfileName::Default => ChronicProfile::default(),
            ProfileName::Stressed => ChronicProfile::default().stressed(),
        }
    }
}

/// `[env]`: grid, chronics and environment scalars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvSection {
    /// Grid file; the bundled case-5 grid when absent.
    pub grid: Option<PathBuf>,
    /// Chronic manifest; generated in memory from the fields below when absent.
    pub chronics: Option<PathBuf>,
    pub chronic_seed: u64,
    pub profile: ProfileName,
    pub chronic_count: usize,
    pub chronic_length: usize,
    pub r_min: f64,
    pub rho_soft: f64,
    pub loss_coef: f64,
    pub overload: OverloadParams,
}

impl Default for EnvSection {
    fn default() -> Self {
        let p = EnvParams::default();
        EnvSection {
            grid: None,
            chronics: None,
            chronic_seed: 0,
            profile: ProfileName::default(),
            chronic_count: 20,
            chronic_length: CHRONIC_LENGTH,
            r_min: p.r_min,
            rho_soft: p.rho_soft,
            loss_coef: p.loss_coef,
            overload: p.overload,
        }
    }
}

impl EnvSection {
    pub fn params(&self) -> EnvParams {
        EnvParams { overload: self.overload, r_min: self.r_min, rho_soft: self.rho_soft, loss_coef: self.loss_coef }
    }
}

/// `[algo]`: the strategy plus optional overrides of its default hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgoSection {
    pub strategy: Strategy,
    pub gamma: Option<f64>,
    pub lr: Option<f64>,
    pub batch_size: Option<usize>,
    pub n_minibatches: Option<usize>,
    pub minibatch_size: Option<usize>,
    pub update_start: Option<usize>,
    pub target_entropy_scale: Option<f64>,
    pub tau: Option<f64>,
    pub initial_alpha: Option<f64>,
    pub twin_critics: Option<bool>,
    pub replay_capacity: Option<usize>,
    pub clip_eps: Option<f64>,
    pub vf_coef: Option<f64>,
    pub ent_coef: Option<f64>,
    pub gae_lambda: Option<f64>,
    pub epochs: Option<usize>,
    pub normalize_advantages: Option<bool>,
    pub width: Option<usize>,
}

impl Default for AlgoSection {
    fn default() -> Self {
        AlgoSection {
            strategy: Strategy::Dsacd,
            gamma: None,
            lr: None,
            batch_size: None,
            n_minibatches: None,
            minibatch_size: None,
            update_start: None,
            target_entropy_scale: None,
            tau: None,
            initial_alpha: None,
            twin_critics: None,
            replay_capacity: None,
            clip_eps: None,
            vf_coef: None,
            ent_coef: None,
            gae_lambda: None,
            epochs: None,
            normalize_advantages: None,
            width: None,
        }
    }
}

impl AlgoSection {
    /// The strategy's default column with every override applied.
    pub fn hyper(&self) -> HyperParams {
        let mut hp = self.strategy.default_hyper();
        macro_rules! apply {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { hp.$f = v; })* };
        }
        apply!(
            gamma,
            lr,
            batch_size,
            n_minibatches,
            minibatch_size,
            update_start,
            target_entropy_scale,
            tau,
            initial_alpha,
            twin_critics,
            replay_capacity,
            clip_eps,
            vf_coef,
            ent_coef,
            gae_lambda,
            epochs,
            normalize_advantages,
            width
        );
        hp
    }
}

/// `[run]`: seeds, budget and output location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seeds: Vec<u64>,
    pub budget: usize,
    pub eval_period: usize,
    pub max_episodes: usize,
    pub output: PathBuf,
    /// Run directory name under `output`; derived from the strategy when absent.
    pub name: Option<String>,
}

impl Default for RunSection {
    fn default() -> Self {
        let s = TrainSchedule::default();
        RunSection {
            seeds: (0..5).collect(),
            budget: s.budget,
            eval_period: s.eval_period,
            max_episodes: s.max_episodes,
            output: PathBuf::from("runs"),
            name: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub env: EnvSection,
    pub hierarchy: HierarchyConfig,
    pub algo: AlgoSection,
    pub run: RunSection,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Reads a config file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.env.grid, &mut cfg.env.chronics].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Applies `section.key=value` overrides; values are parsed as TOML,
    /// falling back to a bare string.
    pub fn with_overrides(self, sets: &[String]) -> Result<Self, HarnessError> {
        if sets.is_empty() {
            return Ok(self);
        }
        let mut doc = toml::Value::try_from(&self).map_err(|e| HarnessError::Config(e.to_string()))?;
        for s in sets {
            let (key, raw) = s.split_once('=').ok_or_else(|| HarnessError::Usage(format!("`{s}` is not key=value")))?;
            let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(raw.to_string()));
            let path: Vec<&str> = key.trim().split('.').collect();
            let (last, parents) = path.split_last().expect("split yields one item");
            let mut node = &mut doc;
            for p in parents {
                node = node
                    .as_table_mut()
                    .and_then(|t| t.get_mut(*p))
                    .ok_or_else(|| HarnessError::Config(format!("unknown section `{p}` in `{key}`")))?;
            }
            node.as_table_mut()
                .ok_or_else(|| HarnessError::Config(format!("`{key}` does not name a field")))?
                .insert(last.to_string(), value);
        }
        let text = toml::to_string(&doc).map_err(|e| HarnessError::Config(e.to_string()))?;
        Self::parse(&text)
    }

    pub fn schedule(&self) -> TrainSchedule {
        TrainSchedule { budget: self.run.budget, eval_period: self.run.eval_period, max_episodes: self.run.max_episodes }
    }

    pub fn run_name(&self) -> String {
        self.run.name.clone().unwrap_or_else(|| {
            format!("{}-{}", self.algo.strategy.name(), serde_json::to_value(self.hierarchy.mid_policy).unwrap().as_str().unwrap())
        })
    }

    /// `run.output` under the `GRID_MARL_OUTPUT` root when it is relative.
    pub fn output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ENV) {
            Some(root) if self.run.output.is_relative() => PathBuf::from(root).join(&self.run.output),
            _ => self.run.output.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.run.seeds.is_empty() {
            return Err(HarnessError::SeedBudget("seed list is empty".into()));
        }
        if self.run.budget == 0 || self.run.eval_period == 0 || !self.run.budget.is_multiple_of(self.run.eval_period) {
            return Err(HarnessError::SeedBudget(format!(
                "budget {} must be a positive multiple of eval_period {}",
                self.run.budget, self.run.eval_period
            )));
        }
        self.hierarchy.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.algo.hyper().validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(())
    }
}
