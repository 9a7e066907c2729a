//! JSON experiment configs.
//!
//! ```json
//! {
//!   "env": { "kind": "gridworld", "width": 4, "height": 4, "macrocell_size": 2, "noise": 0.1, "gamma": 0.9 },
//!   "expert": { "kind": "optimal", "hidden_w": [0.0, 0.1, 0.2, 0.7] },
//!   "learner": { "mode": "approximate", "epsilon": 0.3, "epsilon_rl": 0.05, "delta": 0.1 },
//!   "seed": 0
//! }
//! ```
//!
//! Relative paths are resolved against the config file's directory.

use std::path::{Path, PathBuf};

use apprentice_core::apprentice::{
    mix_policies, ApprenticeConfig, ApprenticeError, ExpertEstimate, Mode, Problem, RlBackend,
};
use apprentice_core::environments::{make_gridworld, make_random_mdp, random_weights, GridworldSpec};
use apprentice_core::mdp::linear_reward;
use apprentice_core::par::Exec;
use apprentice_core::rl::solve_eps_optimal;
use apprentice_core::rng::substream;
use apprentice_core::{Mdp, Policy, Trajectory};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::CliError;

pub const SEED_ENV: &str = "APPRENTICE_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvConfig {
    Gridworld {
        width: usize,
        height: usize,
        macrocell_size: usize,
        #[serde(default)]
        noise: f64,
        gamma: f64,
    },
    Random {
        num_states: usize,
        num_actions: usize,
        k: usize,
        outdegree: usize,
        gamma: f64,
        /// Seed of the instance itself, independent of the run seed.
        #[serde(default)]
        instance_seed: u64,
    },
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExpertConfig {
    /// `eps_rl`-optimal policy for `R = phi . hidden_w`. A missing `hidden_w`
    /// is drawn from the run seed.
    Optimal {
        #[serde(default)]
        hidden_w: Option<Vec<f64>>,
        #[serde(default)]
        eps_rl: Option<f64>,
    },
    /// Per-episode mixture of optimal policies for several weight vectors.
    Mixture {
        hidden_ws: Vec<Vec<f64>>,
        weights: Vec<f64>,
        #[serde(default)]
        eps_rl: Option<f64>,
    },
    /// A policy stored as JSON.
    Policy { path: PathBuf },
    /// Recorded demonstrations stored as a JSON array of trajectories.
    Demos { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerConfig {
    pub mode: Mode,
    pub epsilon: f64,
    pub epsilon_rl: f64,
    pub delta: f64,
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default)]
    pub expert_estimate: Option<ExpertEstimate>,
    #[serde(default = "default_backend")]
    pub rl_backend: RlBackend,
    #[serde(default)]
    pub initial_policy: Option<Policy>,
    #[serde(default)]
    pub exec: Exec,
}

fn default_max_iterations() -> usize {
    100
}

fn default_backend() -> RlBackend {
    RlBackend::Planning
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub expert: ExpertConfig,
    pub learner: LearnerConfig,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub epsilon: Vec<f64>,
    pub epsilon_rl: Vec<f64>,
    pub k: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub base: RunConfig,
    pub grid: SweepGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    pub params: apprentice_core::quantum_cost::CostParams,
    pub grid: apprentice_core::quantum_cost::CostGrid,
}

/// Reads and parses a JSON file. IO problems and parse problems map to
/// different exit codes.
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Seed from the environment when set, otherwise from the config.
pub fn effective_seed(config_seed: u64) -> Result<(u64, &'static str), CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(|s| (s, "env"))
            .map_err(|_| CliError::Config(format!("{SEED_ENV}: `{v}` is not an unsigned integer"))),
        Err(_) => Ok((config_seed, "config")),
    }
}

fn field(name: &str, message: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{name}: {message}"))
}

impl LearnerConfig {
    pub fn to_core(&self, seed: u64) -> Result<ApprenticeConfig, CliError> {
        let mut c = ApprenticeConfig::new(self.mode, self.epsilon, self.epsilon_rl, self.delta);
        c.rho = self.rho;
        c.max_iterations = self.max_iterations;
        if let Some(e) = &self.expert_estimate {
            c.expert_estimate = e.clone();
        }
        c.rl_backend = self.rl_backend;
        c.initial_policy = self.initial_policy.clone();
        c.seed = seed;
        c.exec = self.exec;
        c.validate().map_err(|e| match e {
            ApprenticeError::Config { field, message } => CliError::Config(format!("learner.{field}: {message}")),
            other => CliError::Config(format!("learner: {other}")),
        })?;
        Ok(c)
    }
}

impl RunConfig {
    /// Builds the environment and the expert.
    pub fn problem(&self, base_dir: &Path, seed: u64) -> Result<Problem, CliError> {
        let (mdp, features) = match &self.env {
            EnvConfig::Gridworld {
                width,
                height,
                macrocell_size,
                noise,
                gamma,
            } => {
                let cells = (width / macrocell_size.max(&1)) * (height / macrocell_size.max(&1));
                make_gridworld(&GridworldSpec {
                    width: *width,
                    height: *height,
                    macrocell_size: *macrocell_size,
                    noise: *noise,
                    discount: *gamma,
                    hidden_w: vec![0.0; cells],
                })
                .map_err(|e| field("env", e))?
            }
            EnvConfig::Random {
                num_states,
                num_actions,
                k,
                outdegree,
                gamma,
                instance_seed,
            } => make_random_mdp(*num_states, *num_actions, *k, *outdegree, *gamma, *instance_seed)
                .map_err(|e| field("env", e))?,
            EnvConfig::File { path } => {
                let path = base_dir.join(path);
                let (mdp, features) = Mdp::load(&path).map_err(|e| match e {
                    apprentice_core::Error::Io(io) => CliError::io(&path, io),
                    other => field("env.path", other),
                })?;
                let features = features.ok_or_else(|| field("env.path", "MDP file has no features"))?;
                (mdp, features)
            }
        };
        let k = features.dim();
        let eps_rl_default = self.learner.epsilon_rl;
        let optimal = |w: &[f64], eps_rl: Option<f64>, name: &str| -> Result<Policy, CliError> {
            let reward = linear_reward(&features, w).map_err(|e| field(name, e))?;
            solve_eps_optimal(&mdp, &reward, eps_rl.unwrap_or(eps_rl_default)).map_err(|e| field(name, e))
        };

        let (expert_policy, demos) = match &self.expert {
            ExpertConfig::Optimal { hidden_w, eps_rl } => {
                let w = match hidden_w {
                    Some(w) => w.clone(),
                    None => random_weights(k, 1.0, &mut substream(seed, u64::MAX)),
                };
                check_weights(&w, k, "expert.hidden_w")?;
                (Some(optimal(&w, *eps_rl, "expert.hidden_w")?), None)
            }
            ExpertConfig::Mixture {
                hidden_ws,
                weights,
                eps_rl,
            } => {
                let comps = hidden_ws
                    .iter()
                    .map(|w| {
                        check_weights(w, k, "expert.hidden_ws")?;
                        optimal(w, *eps_rl, "expert.hidden_ws")
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                (
                    Some(mix_policies(&comps, weights).map_err(|e| field("expert.weights", e))?),
                    None,
                )
            }
            ExpertConfig::Policy { path } => {
                let policy: Policy = load(&base_dir.join(path))?;
                policy.validate(&mdp).map_err(|e| field("expert.path", e))?;
                (Some(policy), None)
            }
            ExpertConfig::Demos { path } => {
                let demos: Vec<Trajectory> = load(&base_dir.join(path))?;
                (None, Some(demos))
            }
        };
        Ok(Problem {
            mdp,
            features,
            expert_policy,
            demos,
        })
    }
}

fn check_weights(w: &[f64], k: usize, name: &str) -> Result<(), CliError> {
    if w.len() != k {
        return Err(field(name, format!("expected {k} weights, got {}", w.len())));
    }
    let l1: f64 = w.iter().map(|x| x.abs()).sum();
    if !(l1 <= 1.0 + 1e-12) {
        return Err(field(name, format!("l1-norm {l1} exceeds 1")));
    }
    Ok(())
}

/// Rewrites an environment so that it has `k` features. Gridworlds pick the
/// macrocell size that yields `k` cells.
pub fn env_with_k(env: &EnvConfig, k: usize) -> Result<EnvConfig, CliError> {
    match env {
        EnvConfig::Gridworld {
            width,
            height,
            noise,
            gamma,
            ..
        } => {
            let m = (1..=(*width).min(*height))
                .find(|m| width % m == 0 && height % m == 0 && (width / m) * (height / m) == k)
                .ok_or_else(|| {
                    field(
                        "grid.k",
                        format!("no macrocell size gives k = {k} on a {width}x{height} grid"),
                    )
                })?;
            Ok(EnvConfig::Gridworld {
                width: *width,
                height: *height,
                macrocell_size: m,
                noise: *noise,
                gamma: *gamma,
            })
        }
        EnvConfig::Random {
            num_states,
            num_actions,
            outdegree,
            gamma,
            instance_seed,
            ..
        } => Ok(EnvConfig::Random {
            num_states: *num_states,
            num_actions: *num_actions,
            k,
            outdegree: *outdegree,
            gamma: *gamma,
            instance_seed: *instance_seed,
        }),
        EnvConfig::File { .. } => Err(field("base.env", "sweeping k needs a gridworld or random environment")),
    }
}
