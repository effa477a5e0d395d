//! Experiment configuration: a single JSON document, parsed fail-closed.
//!
//! serde's `deny_unknown_fields` cannot see through flattened enums, so
//! strictness is enforced structurally instead: parse, re-serialize, and walk
//! the original document requiring every key to survive the round trip. A
//! misspelled or unknown field anywhere errors with its path.

use crate::grid::{Cell, DistanceTarget, GridSpec, LineGoalTask};
use crate::io::MdpDocument;
use crate::mdp::{random_mdp, random_reward, FiniteMdp, RewardTable, TaskSet};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("unknown or misspelled field at {path}")]
    UnknownField { path: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Deserializes strictly: every field present in `value` must also appear
/// when the parsed result is serialized back.
pub fn strict_from_value<T: Serialize + DeserializeOwned>(
    value: &serde_json::Value,
) -> Result<T, ConfigError> {
    let parsed: T =
        serde_json::from_value(value.clone()).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let echoed = serde_json::to_value(&parsed).map_err(|e| ConfigError::Parse(e.to_string()))?;
    check_no_extra_keys(value, &echoed, "config")?;
    Ok(parsed)
}

fn check_no_extra_keys(
    original: &serde_json::Value,
    echoed: &serde_json::Value,
    path: &str,
) -> Result<(), ConfigError> {
    use serde_json::Value;
    match (original, echoed) {
        (Value::Object(original), Value::Object(echoed)) => {
            for (key, inner) in original {
                match echoed.get(key) {
                    Some(echo) => check_no_extra_keys(inner, echo, &format!("{path}.{key}"))?,
                    None => {
                        return Err(ConfigError::UnknownField { path: format!("{path}.{key}") })
                    }
                }
            }
            Ok(())
        }
        (Value::Array(original), Value::Array(echoed)) => {
            for (index, (inner, echo)) in original.iter().zip(echoed).enumerate() {
                check_no_extra_keys(inner, echo, &format!("{path}[{index}]"))?;
            }
            Ok(())
        }
        // An object where the echo has a scalar (or vice versa) means serde
        // consumed the node some other way; scalar values themselves carry no
        // keys to check.
        (Value::Object(original), _) => {
            if let Some(key) = original.keys().next() {
                return Err(ConfigError::UnknownField { path: format!("{path}.{key}") });
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub version: u64,
    pub mdp: MdpSource,
    pub tasks: Vec<TaskSpec>,
    #[serde(default)]
    pub subsets: Vec<Vec<usize>>,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_divergence_factor")]
    pub divergence_factor: f64,
    pub seeds: SeedSpec,
    #[serde(default)]
    pub horizon: Option<usize>,
    #[serde(default)]
    pub target: Option<DistanceTarget>,
}

fn default_temperature() -> f64 {
    1.0
}

fn default_tol() -> f64 {
    1e-10
}

fn default_divergence_factor() -> f64 {
    crate::compose::DEFAULT_DIVERGENCE_FACTOR
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MdpSource {
    File { path: String },
    Random { seed: u64, num_states: usize, num_actions: usize, discount: f64, sparsity: f64 },
    Grid { spec: GridSpec, discount: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskSpec {
    pub label: String,
    #[serde(flatten)]
    pub source: TaskSource,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskSource {
    /// Line task on a grid source.
    Line(LineGoalTask),
    /// Negative-distance shaping toward a cell, grid sources only.
    Goal { cell: Cell },
    /// Hazard-band penalty plus goal shaping, grid sources only.
    ObstacleAvoid { goal: Cell, penalty: f64 },
    /// Uniform random rewards; the seed is mixed with the sweep seed.
    RandomReward { seed: u64, bound: f64 },
    /// Pulled from the file source's reward map by this task's label.
    Stored {},
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    List(Vec<u64>),
    Range { start: u64, count: u64 },
}

impl SeedSpec {
    pub fn seeds(&self) -> Vec<u64> {
        match self {
            SeedSpec::List(seeds) => seeds.clone(),
            SeedSpec::Range { start, count } => (*start..start + count).collect(),
        }
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let config: ExperimentConfig = strict_from_value(&value)?;
    config.validate()?;
    Ok(config)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.version != 1 {
            return Err(ConfigError::Invalid(format!(
                "unsupported config version {}, expected 1",
                self.version
            )));
        }
        if self.tasks.is_empty() {
            return Err(ConfigError::Invalid("tasks must be non-empty".into()));
        }
        let mut labels: Vec<&str> = self.tasks.iter().map(|t| t.label.as_str()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(ConfigError::Invalid("task labels must be unique".into()));
        }
        for (index, task) in self.tasks.iter().enumerate() {
            if task.label.is_empty() || task.label.contains([',', '"', '\n']) {
                return Err(ConfigError::Invalid(format!(
                    "task {index} label {:?} must be non-empty without commas, quotes, or newlines",
                    task.label
                )));
            }
        }
        for (index, subset) in self.subsets.iter().enumerate() {
            for &task in subset {
                if task >= self.tasks.len() {
                    return Err(ConfigError::Invalid(format!(
                        "subset {index} references task {task}, but there are only {} tasks",
                        self.tasks.len()
                    )));
                }
            }
        }
        if self.seeds.seeds().is_empty() {
            return Err(ConfigError::Invalid("seeds must be non-empty".into()));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(ConfigError::Invalid(format!(
                "temperature {} must be finite and > 0",
                self.temperature
            )));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(ConfigError::Invalid(format!("tol {} must be finite and > 0", self.tol)));
        }
        if !(self.divergence_factor.is_finite() && self.divergence_factor > 0.0) {
            return Err(ConfigError::Invalid(format!(
                "divergence_factor {} must be finite and > 0",
                self.divergence_factor
            )));
        }
        Ok(())
    }

    /// True when the problem instance varies with the sweep seed.
    pub fn is_seed_swept(&self) -> bool {
        matches!(self.mdp, MdpSource::Random { .. })
            || self.tasks.iter().any(|t| matches!(t.source, TaskSource::RandomReward { .. }))
    }
}

/// A fully materialized problem: the MDP, the labeled tasks, and grid
/// geometry when the source was a grid.
pub struct ResolvedExperiment {
    pub mdp: FiniteMdp,
    pub tasks: TaskSet,
    pub grid: Option<GridSpec>,
}

/// Mixes a per-task base seed with the sweep seed; sweeping must change every
/// random component, and distinct tasks must stay decorrelated.
fn mix_seeds(base: u64, sweep: u64) -> u64 {
    sweep.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(base)
}

impl ExperimentConfig {
    /// Builds the concrete instance for one sweep seed. `config_dir` anchors
    /// relative file paths.
    pub fn resolve(
        &self,
        config_dir: &Path,
        sweep_seed: u64,
    ) -> Result<ResolvedExperiment, ConfigError> {
        let (mdp, grid, document) = match &self.mdp {
            MdpSource::File { path } => {
                let full = config_dir.join(path);
                let document: MdpDocument = crate::io::load_json(&full).map_err(|e| {
                    ConfigError::Invalid(format!("loading {}: {e}", full.display()))
                })?;
                let mdp = document
                    .mdp()
                    .map_err(|e| ConfigError::Invalid(format!("{}: {e}", full.display())))?;
                (mdp, None, Some(document))
            }
            MdpSource::Random { seed, num_states, num_actions, discount, sparsity } => {
                let mdp = random_mdp(
                    mix_seeds(*seed, sweep_seed),
                    *num_states,
                    *num_actions,
                    *discount,
                    *sparsity,
                )
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
                (mdp, None, None)
            }
            MdpSource::Grid { spec, discount } => {
                let mdp = crate::grid::build_grid_mdp(spec, *discount)
                    .map_err(|e| ConfigError::Invalid(e.to_string()))?;
                (mdp, Some(spec.clone()), None)
            }
        };
        let mut labeled = Vec::with_capacity(self.tasks.len());
        for task in &self.tasks {
            let reward =
                materialize_task(task, &mdp, grid.as_ref(), document.as_ref(), sweep_seed)?;
            labeled.push((task.label.clone(), reward));
        }
        let tasks = TaskSet::new(labeled).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(ResolvedExperiment { mdp, tasks, grid })
    }
}

fn materialize_task(
    task: &TaskSpec,
    mdp: &FiniteMdp,
    grid: Option<&GridSpec>,
    document: Option<&MdpDocument>,
    sweep_seed: u64,
) -> Result<RewardTable, ConfigError> {
    let need_grid = || {
        grid.ok_or_else(|| {
            ConfigError::Invalid(format!("task '{}' needs a grid mdp source", task.label))
        })
    };
    match &task.source {
        TaskSource::Line(line) => crate::grid::line_reward(need_grid()?, line)
            .map_err(|e| ConfigError::Invalid(format!("task '{}': {e}", task.label))),
        TaskSource::Goal { cell } => crate::grid::goal_reward(need_grid()?, *cell)
            .map_err(|e| ConfigError::Invalid(format!("task '{}': {e}", task.label))),
        TaskSource::ObstacleAvoid { goal, penalty } => {
            crate::grid::obstacle_avoid_reward(need_grid()?, *penalty, *goal)
                .map_err(|e| ConfigError::Invalid(format!("task '{}': {e}", task.label)))
        }
        TaskSource::RandomReward { seed, bound } => {
            random_reward(mix_seeds(*seed, sweep_seed), mdp, *bound)
                .map_err(|e| ConfigError::Invalid(format!("task '{}': {e}", task.label)))
        }
        TaskSource::Stored {} => {
            let document = document.ok_or_else(|| {
                ConfigError::Invalid(format!(
                    "task '{}' is stored, which needs a file mdp source",
                    task.label
                ))
            })?;
            let labeled =
                document.labeled_rewards().map_err(|e| ConfigError::Invalid(e.to_string()))?;
            labeled
                .into_iter()
                .find(|(label, _)| *label == task.label)
                .map(|(_, reward)| reward)
                .ok_or_else(|| {
                    ConfigError::Invalid(format!(
                        "task '{}' not found in the file's reward map",
                        task.label
                    ))
                })
        }
    }
}
