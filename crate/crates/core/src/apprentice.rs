//! The apprenticeship loop.
//!
//! Both modes share one skeleton: solve the max-margin problem over the
//! history rows `mu_E - mu^(j)`, check for termination, plan against the
//! reward `w . phi`, estimate the new policy's feature expectation, append.
//!
//! * Ideal mode uses exact feature expectations and stops once the margin
//!   `t` is at most `eps`.
//! * Approximate mode estimates every feature expectation by Monte Carlo to
//!   `eps/3`, solves the margin problem to `eps/3`, and stops once the closest
//!   estimate is within `eps + 2 eps/3 + rho` of the expert estimate.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::{
    lemma1_hypotheses, lemma1_ratio_bound, projection_with_coefficient, theorem1_iterations, IterationDiagnostic,
    RATIO_SLACK,
};
use crate::error::Error;
use crate::features::{
    exact_feature_expectation, expert_estimate, mc_feature_expectation_with, truncation_horizon, FeatureExpectation,
};
use crate::margin::{solve_max_margin, MarginSolution};
use crate::mdp::{build_empirical_mdp, check_mixture_weights, linear_reward, rollout_unchecked};
use crate::par::Exec;
use crate::rl::value_iteration;
use crate::rng::substream;
use crate::{FeatureMap, Mdp, Policy, Trajectory};

/// Margin accuracy used by ideal mode.
pub const IDEAL_MARGIN_EPS: f64 = 1e-6;

const DEMO_STREAM: u64 = 0;
const ESTIMATE_STREAM: u64 = 1 << 32;
const PLANNER_STREAM: u64 = 2 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Ideal,
    Approximate,
}

/// How `mu_hat_E` is obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExpertEstimate {
    /// Average over recorded or sampled demonstrations. When demonstrations
    /// are sampled, each has `horizon + 1` steps; the default horizon keeps
    /// the truncation tail below `eps/6`.
    Demos {
        m: usize,
        #[serde(default)]
        horizon: Option<usize>,
    },
    /// Exact feature expectation of the expert policy.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RlBackend {
    /// Value iteration on the true transition kernel.
    Planning,
    /// Value iteration on an empirical kernel built from generative-model
    /// samples. Approximate mode only.
    Generative { samples_per_pair: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApprenticeConfig {
    pub epsilon: f64,
    pub epsilon_rl: f64,
    pub delta: f64,
    /// Termination slack; defaults to `eps/3`.
    #[serde(default)]
    pub rho: Option<f64>,
    pub mode: Mode,
    pub max_iterations: usize,
    pub expert_estimate: ExpertEstimate,
    pub rl_backend: RlBackend,
    /// Defaults to the uniform random policy.
    #[serde(default)]
    pub initial_policy: Option<Policy>,
    pub seed: u64,
    #[serde(default)]
    pub exec: Exec,
}

impl ApprenticeConfig {
    pub fn new(mode: Mode, epsilon: f64, epsilon_rl: f64, delta: f64) -> Self {
        Self {
            epsilon,
            epsilon_rl,
            delta,
            rho: None,
            mode,
            max_iterations: 1000,
            expert_estimate: match mode {
                Mode::Ideal => ExpertEstimate::Exact,
                Mode::Approximate => ExpertEstimate::Demos { m: 500, horizon: None },
            },
            rl_backend: RlBackend::Planning,
            initial_policy: None,
            seed: 0,
            exec: Exec::default(),
        }
    }

    pub fn rho(&self) -> f64 {
        self.rho.unwrap_or(self.epsilon / 3.0)
    }

    /// Termination threshold on the relevant distance for the mode.
    pub fn threshold(&self) -> f64 {
        match self.mode {
            Mode::Ideal => self.epsilon,
            Mode::Approximate => self.epsilon + 2.0 * self.epsilon / 3.0 + self.rho(),
        }
    }

    pub fn validate(&self) -> Result<(), ApprenticeError> {
        let unit = |name: &'static str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(ApprenticeError::Config {
                    field: name,
                    message: format!("{v} is not in (0, 1)"),
                })
            }
        };
        unit("epsilon", self.epsilon)?;
        unit("epsilon_rl", self.epsilon_rl)?;
        unit("delta", self.delta)?;
        if self.epsilon < self.epsilon_rl.sqrt() {
            return Err(ApprenticeError::Config {
                field: "epsilon",
                message: format!(
                    "input condition eps >= sqrt(eps_rl) violated: {} < sqrt({}) = {}",
                    self.epsilon,
                    self.epsilon_rl,
                    self.epsilon_rl.sqrt()
                ),
            });
        }
        if !(self.rho() >= 0.0) {
            return Err(ApprenticeError::Config {
                field: "rho",
                message: format!("{} must be non-negative", self.rho()),
            });
        }
        if self.max_iterations == 0 {
            return Err(ApprenticeError::Config {
                field: "max_iterations",
                message: "must be at least 1".into(),
            });
        }
        if let ExpertEstimate::Demos { m: 0, .. } = self.expert_estimate {
            return Err(ApprenticeError::Config {
                field: "expert_estimate.m",
                message: "must be at least 1".into(),
            });
        }
        if let RlBackend::Generative { samples_per_pair } = self.rl_backend {
            if samples_per_pair == 0 {
                return Err(ApprenticeError::Config {
                    field: "rl_backend.samples_per_pair",
                    message: "must be at least 1".into(),
                });
            }
            if self.mode == Mode::Ideal {
                return Err(ApprenticeError::Config {
                    field: "rl_backend",
                    message: "ideal mode plans on the exact model".into(),
                });
            }
        }
        Ok(())
    }
}

/// What the learner is given about the task.
#[derive(Debug, Clone)]
pub struct Problem {
    pub mdp: Mdp,
    pub features: FeatureMap,
    /// Needed for exact expert estimates and for sampling demonstrations.
    pub expert_policy: Option<Policy>,
    /// Recorded demonstrations; used before sampling new ones.
    pub demos: Option<Vec<Trajectory>>,
}

/// Row 1 is `mu_hat_E`; row `i + 2` is `mu_hat_E - mu^(i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryMatrix {
    rows: Vec<Vec<f64>>,
}

impl HistoryMatrix {
    pub fn new(mu_e: Vec<f64>) -> Self {
        Self { rows: vec![mu_e] }
    }

    pub fn push(&mut self, mu: &[f64]) -> Result<(), Error> {
        let k = self.rows[0].len();
        if mu.len() != k {
            return Err(Error::Dimension {
                what: "history row",
                expected: k,
                got: mu.len(),
            });
        }
        let row = crate::sub(&self.rows[0], mu);
        self.rows.push(row);
        Ok(())
    }

    pub fn expert(&self) -> &[f64] {
        &self.rows[0]
    }

    /// The difference rows `mu_hat_E - mu^(j)`.
    pub fn deltas(&self) -> &[Vec<f64>] {
        &self.rows[1..]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    HullReached,
    /// Only carried by the partial result of a capped run.
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub w: Vec<f64>,
    pub t_margin: f64,
    /// `||mu_hat_E - mu^(j)||` for every policy so far.
    pub distances: Vec<f64>,
    pub i_min: usize,
    pub dist_min: f64,
    pub margin_iterations: usize,
    /// Value-iteration sweeps; 0 on the terminating iteration.
    pub rl_sweeps: usize,
    /// Generative-model calls made by the planner.
    pub rl_samples: usize,
    /// Episodes behind the new feature expectation; 0 when exact or when the
    /// loop stopped here.
    pub mc_samples: usize,
    /// Feature expectation of the policy found in this iteration.
    pub mu: Option<Vec<f64>>,
    pub diagnostic: Option<IterationDiagnostic>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub mode: Mode,
    pub status: Status,
    /// Terminal iteration `n`.
    pub iterations: usize,
    pub i_min: usize,
    pub dist_min: f64,
    pub threshold: f64,
    /// Final margin `t`.
    pub t_final: f64,
    pub expert: FeatureExpectation,
    pub history: HistoryMatrix,
    pub policies: Vec<Policy>,
    pub estimates: Vec<FeatureExpectation>,
    pub records: Vec<IterationRecord>,
    /// Convex weights over `policies` of the final hull point.
    pub mixture_weights: Vec<f64>,
    /// `n_max` used to split the failure probability.
    pub n_max: usize,
    pub theorem1_bound: Option<f64>,
    pub warnings: Vec<String>,
    /// Wall-clock milliseconds per iteration. Not part of any determinism
    /// guarantee.
    pub wallclock_ms: Vec<f64>,
}

impl RunResult {
    /// The policy whose feature expectation realises the final hull point.
    pub fn mixed_policy(&self) -> Result<Policy, Error> {
        mix_policies(&self.policies, &self.mixture_weights)
    }

    pub fn best_policy(&self) -> &Policy {
        &self.policies[self.i_min]
    }
}

#[derive(Debug, Error)]
pub enum ApprenticeError {
    #[error("invalid config field `{field}`: {message}")]
    Config { field: &'static str, message: String },

    #[error("stopped after {} iterations without meeting the threshold", partial.iterations)]
    MaxIterations { partial: Box<RunResult> },

    #[error("{phase} failed at iteration {iteration}: {source}")]
    Subroutine {
        iteration: usize,
        phase: &'static str,
        #[source]
        source: Error,
    },
}

fn at(iteration: usize, phase: &'static str) -> impl FnOnce(Error) -> ApprenticeError {
    move |source| ApprenticeError::Subroutine {
        iteration,
        phase,
        source,
    }
}

/// Lowest index achieving the minimum.
pub fn select_best(distances: &[f64]) -> Result<usize, Error> {
    if distances.is_empty() {
        return Err(Error::invalid("select_best needs at least one distance"));
    }
    Ok((0..distances.len()).fold(0, |best, j| if distances[j] < distances[best] { j } else { best }))
}

/// Mixture that draws `pi_j` with probability `weights[j]` at the start of
/// each episode. A single component with weight 1 is returned unchanged.
pub fn mix_policies(policies: &[Policy], weights: &[f64]) -> Result<Policy, Error> {
    check_mixture_weights(policies.len(), weights)?;
    if policies.len() == 1 {
        return Ok(policies[0].clone());
    }
    Ok(Policy::Mixture {
        components: policies.to_vec(),
        weights: weights.to_vec(),
    })
}

fn estimate_expert(config: &ApprenticeConfig, problem: &Problem) -> Result<FeatureExpectation, ApprenticeError> {
    let gamma = problem.mdp.discount();
    match &config.expert_estimate {
        ExpertEstimate::Exact => {
            let policy = problem.expert_policy.as_ref().ok_or(ApprenticeError::Config {
                field: "expert_estimate",
                message: "exact estimate needs an expert policy".into(),
            })?;
            exact_feature_expectation(&problem.mdp, &problem.features, policy).map_err(at(0, "expert estimate"))
        }
        ExpertEstimate::Demos { m, horizon } => {
            if let Some(demos) = &problem.demos {
                return expert_estimate(demos, &problem.features, gamma).map_err(at(0, "expert estimate"));
            }
            let policy = problem.expert_policy.as_ref().ok_or(ApprenticeError::Config {
                field: "expert_estimate",
                message: "sampling demonstrations needs an expert policy".into(),
            })?;
            policy.validate(&problem.mdp).map_err(at(0, "expert estimate"))?;
            let horizon = match horizon {
                Some(h) => *h,
                None => truncation_horizon(config.epsilon / 3.0, gamma).map_err(at(0, "expert estimate"))?,
            };
            let mut rng = substream(config.seed, DEMO_STREAM);
            let demos: Vec<Trajectory> = (0..*m)
                .map(|_| rollout_unchecked(&problem.mdp, policy, horizon, &mut rng))
                .collect();
            expert_estimate(&demos, &problem.features, gamma).map_err(at(0, "expert estimate"))
        }
    }
}

struct Loop<'a> {
    config: &'a ApprenticeConfig,
    problem: &'a Problem,
    /// Failure probability per Monte Carlo estimate.
    delta_each: f64,
}

impl Loop<'_> {
    fn estimate(&self, policy: &Policy, iteration: usize) -> Result<FeatureExpectation, ApprenticeError> {
        let (mdp, features) = (&self.problem.mdp, &self.problem.features);
        match self.config.mode {
            Mode::Ideal => exact_feature_expectation(mdp, features, policy),
            Mode::Approximate => {
                let mut rng = substream(self.config.seed, ESTIMATE_STREAM + iteration as u64);
                mc_feature_expectation_with(
                    self.config.exec,
                    mdp,
                    features,
                    policy,
                    self.config.epsilon / 3.0,
                    self.delta_each,
                    &mut rng,
                )
            }
        }
        .map_err(at(iteration, "feature expectation"))
    }

    /// Returns the policy, value-iteration sweeps and generative samples.
    fn plan(&self, w: &[f64], hull_dist: f64, iteration: usize) -> Result<(Policy, usize, usize), ApprenticeError> {
        let reward = linear_reward(&self.problem.features, w).map_err(at(iteration, "reward"))?;
        let mdp = &self.problem.mdp;
        match (self.config.mode, self.config.rl_backend) {
            (Mode::Ideal, _) => {
                // the contraction argument measures suboptimality under the
                // unnormalised reward (mu_E - mu_bar) . phi
                let eps = self.config.epsilon_rl / hull_dist.max(1.0);
                let plan = value_iteration(mdp, &reward, eps).map_err(at(iteration, "planner"))?;
                Ok((plan.policy, plan.sweeps, 0))
            }
            (Mode::Approximate, RlBackend::Planning) => {
                let plan = value_iteration(mdp, &reward, self.config.epsilon_rl).map_err(at(iteration, "planner"))?;
                Ok((plan.policy, plan.sweeps, 0))
            }
            (Mode::Approximate, RlBackend::Generative { samples_per_pair }) => {
                let mut rng = substream(self.config.seed, PLANNER_STREAM + iteration as u64);
                let model = build_empirical_mdp(mdp, samples_per_pair, &mut rng).map_err(at(iteration, "planner"))?;
                let plan =
                    value_iteration(&model, &reward, self.config.epsilon_rl).map_err(at(iteration, "planner"))?;
                let calls = samples_per_pair * mdp.num_states() * mdp.num_actions();
                Ok((plan.policy, plan.sweeps, calls))
            }
        }
    }
}

fn distances(history: &HistoryMatrix) -> Vec<f64> {
    history.deltas().iter().map(|d| crate::norm2(d)).collect()
}

fn diagnose(
    iteration: usize,
    mu_e: &[f64],
    margin: &MarginSolution,
    mu_new: &[f64],
    k: usize,
    gamma: f64,
    eps_rl: f64,
) -> Option<IterationDiagnostic> {
    let dist = crate::norm2(&margin.hull_point);
    let mu_bar = crate::sub(mu_e, &margin.hull_point);
    let (mu_tilde, lambda) = projection_with_coefficient(mu_e, &mu_bar, mu_new, eps_rl).ok()?;
    let ratio_observed = crate::norm2(&crate::sub(mu_e, &mu_tilde)) / dist;
    let ratio_bound = lemma1_ratio_bound(k, gamma, eps_rl, dist).ok();
    Some(IterationDiagnostic {
        iteration,
        distance: dist,
        ratio_observed,
        ratio_bound,
        hull_ratio: None,
        lambda,
        hypotheses_hold: lemma1_hypotheses(dist, eps_rl),
        bound_satisfied: ratio_bound.is_some_and(|b| ratio_observed <= b + RATIO_SLACK),
    })
}

/// Runs the apprenticeship loop to termination.
pub fn run_apprenticeship(config: &ApprenticeConfig, problem: &Problem) -> Result<RunResult, ApprenticeError> {
    config.validate()?;
    let (mdp, features) = (&problem.mdp, &problem.features);
    features.check_matches(mdp).map_err(at(0, "setup"))?;
    let k = features.dim();
    let gamma = mdp.discount();
    let threshold = config.threshold();
    let mut warnings = Vec::new();

    let theorem1 = match theorem1_iterations(k, gamma, config.epsilon, config.epsilon_rl) {
        Ok(b) => Some(b.iterations),
        Err(e) => {
            warnings.push(format!("no finite iteration bound: {e}"));
            None
        }
    };
    let n_max = match theorem1 {
        Some(b) => config.max_iterations.min(b.ceil().max(1.0) as usize),
        None => config.max_iterations,
    };
    let lp = Loop {
        config,
        problem,
        delta_each: config.delta / (3.0 * n_max as f64),
    };

    let start = Instant::now();
    let expert = estimate_expert(config, problem)?;
    if crate::dot(&expert.vec, &expert.vec) < 2.0 * config.epsilon_rl {
        warnings.push(format!(
            "||mu_E||^2 = {} is below 2 eps_rl = {}; the per-iteration contraction bound is not guaranteed",
            crate::dot(&expert.vec, &expert.vec),
            2.0 * config.epsilon_rl
        ));
    }
    let initial = config
        .initial_policy
        .clone()
        .unwrap_or_else(|| Policy::uniform(mdp.num_states(), mdp.num_actions()));
    initial.validate(mdp).map_err(at(0, "initial policy"))?;
    let first = lp.estimate(&initial, 0)?;

    let mut history = HistoryMatrix::new(expert.vec.clone());
    history.push(&first.vec).map_err(at(0, "history"))?;
    let mut policies = vec![initial];
    let mut estimates = vec![first];
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut wallclock_ms = Vec::new();
    let margin_eps = match config.mode {
        Mode::Ideal => IDEAL_MARGIN_EPS,
        Mode::Approximate => config.epsilon / 3.0,
    };

    let mut iteration = 1;
    loop {
        let margin = solve_max_margin(history.deltas(), margin_eps).map_err(at(iteration, "margin solver"))?;
        let dists = distances(&history);
        let i_min = select_best(&dists).map_err(at(iteration, "min finding"))?;
        let dist_min = dists[i_min];

        // the previous step's diagnostic learns the new hull distance here
        if let Some(d) = records.last_mut().and_then(|r| r.diagnostic.as_mut()) {
            d.hull_ratio = Some(crate::norm2(&margin.hull_point) / d.distance);
        }

        let stop = match config.mode {
            Mode::Ideal => margin.t <= threshold,
            Mode::Approximate => dist_min <= threshold,
        };
        let status = if stop {
            Some(Status::Converged)
        } else if margin.is_inseparable() {
            Some(Status::HullReached)
        } else {
            None
        };

        let mut record = IterationRecord {
            iteration,
            w: margin.w.clone(),
            t_margin: margin.t,
            distances: dists,
            i_min,
            dist_min,
            margin_iterations: margin.iterations,
            rl_sweeps: 0,
            rl_samples: 0,
            mc_samples: 0,
            mu: None,
            diagnostic: None,
        };

        let result = |status: Status, records: Vec<IterationRecord>, wallclock_ms: Vec<f64>| RunResult {
            mode: config.mode,
            status,
            iterations: iteration,
            i_min,
            dist_min,
            threshold,
            t_final: margin.t,
            expert: expert.clone(),
            history: history.clone(),
            policies: policies.clone(),
            estimates: estimates.clone(),
            records,
            mixture_weights: margin.weights.clone(),
            n_max,
            theorem1_bound: theorem1,
            warnings: warnings.clone(),
            wallclock_ms,
        };

        if let Some(status) = status {
            records.push(record);
            wallclock_ms.push(elapsed_ms(start) - wallclock_ms.iter().sum::<f64>());
            log::info!("terminated at iteration {iteration} ({status:?}), dist_min {dist_min}");
            return Ok(result(status, records, wallclock_ms));
        }
        if iteration >= config.max_iterations {
            records.push(record);
            wallclock_ms.push(elapsed_ms(start) - wallclock_ms.iter().sum::<f64>());
            return Err(ApprenticeError::MaxIterations {
                partial: Box::new(result(Status::MaxIterations, records, wallclock_ms)),
            });
        }

        let (policy, sweeps, calls) = lp.plan(&margin.w, crate::norm2(&margin.hull_point), iteration)?;
        let estimate = lp.estimate(&policy, iteration)?;
        record.rl_sweeps = sweeps;
        record.rl_samples = calls;
        record.mc_samples = estimate.samples;
        record.mu = Some(estimate.vec.clone());
        record.diagnostic = diagnose(
            iteration,
            history.expert(),
            &margin,
            &estimate.vec,
            k,
            gamma,
            config.epsilon_rl,
        );
        history.push(&estimate.vec).map_err(at(iteration, "history"))?;
        policies.push(policy);
        estimates.push(estimate);
        records.push(record);
        wallclock_ms.push(elapsed_ms(start) - wallclock_ms.iter().sum::<f64>());
        log::debug!("iteration {iteration}: t {} dist_min {dist_min}", margin.t);
        iteration += 1;
    }
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn select_best_examples() {
        assert_eq!(select_best(&[0.5]).unwrap(), 0);
        assert_eq!(select_best(&[0.5, 0.2, 0.9]).unwrap(), 1);
        assert_eq!(select_best(&[0.3, 0.3]).unwrap(), 0);
        assert!(select_best(&[]).is_err());
    }

    #[test]
    fn mix_identity_and_validation() {
        let p = Policy::Deterministic { actions: vec![0, 1] };
        assert_eq!(mix_policies(std::slice::from_ref(&p), &[1.0]).unwrap(), p);
        assert!(mix_policies(&[p.clone(), p.clone()], &[0.5, 0.6]).is_err());
        assert!(mix_policies(std::slice::from_ref(&p), &[0.5, 0.5]).is_err());
    }

    #[test]
    fn history_rows() {
        let mut h = HistoryMatrix::new(vec![1.0, 2.0]);
        h.push(&[0.5, 0.5]).unwrap();
        assert_eq!(h.rows(), &[vec![1.0, 2.0], vec![0.5, 1.5]]);
        assert!(h.push(&[1.0]).is_err());
    }

    #[test]
    fn config_rejects_eps_below_sqrt_eps_rl() {
        let c = ApprenticeConfig::new(Mode::Ideal, 0.1, 0.05, 0.1);
        let err = c.validate().unwrap_err().to_string();
        assert!(err.contains("eps >= sqrt(eps_rl)"), "{err}");
        assert!(ApprenticeConfig::new(Mode::Ideal, 0.3, 0.05, 0.1).validate().is_ok());
    }
}
