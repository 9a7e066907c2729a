//! Feature expectations `mu(pi) = E[sum_t gamma^t phi(s_t, a_t)]`.
//!
//! Three routes are provided: an exact linear solve, a truncated-horizon
//! Monte Carlo estimator with an l2 accuracy/confidence contract, and the
//! empirical average over recorded demonstrations.
//!
//! The Monte Carlo estimator splits its budget `eps` evenly: truncation after
//! `H = truncation_horizon(eps, gamma)` steps costs at most `eps/2`, and the
//! sample mean is within `eps/2` with probability `1 - delta` by a
//! per-coordinate Hoeffding bound (range `[0, 1/(1-gamma)]`, per-coordinate
//! radius `eps / (2 sqrt k)`) and a union bound over the `k` coordinates.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::solve_discounted;
use crate::mdp::{FeatureMap, Mdp, Policy, Trajectory};
use crate::par::{map_indexed, Exec};
use crate::rng::{fork_seed, substream, SimRng};

/// Episodes per Monte Carlo work unit. Each unit owns one substream, so the
/// estimate does not depend on how units are scheduled.
pub const EPISODES_PER_CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    MonteCarlo,
    FromDemos,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureExpectation {
    pub vec: Vec<f64>,
    /// Declared l2 error bound, when one is known.
    pub accuracy: Option<f64>,
    /// Declared failure probability, when one is known.
    pub confidence: Option<f64>,
    pub method: Method,
    /// Episodes (Monte Carlo) or demonstrations averaged; 0 for exact.
    pub samples: usize,
    /// Truncation horizon used, if any.
    pub horizon: Option<usize>,
}

impl FeatureExpectation {
    pub fn norm(&self) -> f64 {
        crate::norm2(&self.vec)
    }
}

/// Smallest `H >= 0` with `gamma^(H+1) / (1 - gamma) <= eps / 2`, i.e.
/// `max(0, ceil(log_gamma(eps (1 - gamma) / 2) - 1))`.
pub fn truncation_horizon(eps: f64, gamma: f64) -> Result<usize> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::invalid(format!("eps {eps} must be positive")));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::invalid(format!("gamma {gamma} is not in [0, 1)")));
    }
    if gamma == 0.0 {
        return Ok(0);
    }
    let tail = |h: usize| gamma.powi(h as i32 + 1) / (1.0 - gamma);
    // a relative slack absorbs rounding in exact cases such as gamma = 0.5, eps = 1
    let fits = |h: usize| tail(h) <= 0.5 * eps * (1.0 + 1e-12);
    let raw = ((eps * (1.0 - gamma) / 2.0).ln() / gamma.ln() - 1.0).ceil();
    let mut h = if raw > 0.0 { raw as usize } else { 0 };
    while h > 0 && fits(h - 1) {
        h -= 1;
    }
    while !fits(h) {
        h += 1;
    }
    Ok(h)
}

/// Episodes needed for an `eps/2` sampling error with probability `1 - delta`:
/// `ceil(2 k ln(2k/delta) / ((1-gamma)^2 (eps/2)^2))`.
pub fn mc_sample_count(k: usize, gamma: f64, eps: f64, delta: f64) -> usize {
    let k = k as f64;
    let half = eps / 2.0;
    (2.0 * k * (2.0 * k / delta).ln() / ((1.0 - gamma).powi(2) * half * half)).ceil() as usize
}

/// `mu(pi | s)` for every state of a stationary policy, as an `S x k` matrix.
pub fn state_feature_expectations(mdp: &Mdp, features: &FeatureMap, policy: &Policy) -> Result<DMatrix<f64>> {
    features.check_matches(mdp)?;
    policy.validate(mdp)?;
    if matches!(policy, Policy::Mixture { .. }) {
        return Err(Error::invalid(
            "per-state feature expectations need a stationary policy",
        ));
    }
    let (n, k) = (mdp.num_states(), features.dim());
    let mut rhs = DMatrix::zeros(n, k);
    for s in 0..n {
        for a in 0..mdp.num_actions() {
            let p = policy.action_prob(s, a).unwrap_or(0.0);
            if p == 0.0 {
                continue;
            }
            for (j, x) in features.phi(s, a).iter().enumerate() {
                rhs[(s, j)] += p * x;
            }
        }
    }
    solve_discounted(mdp, policy, rhs)
}

fn exact_vec(mdp: &Mdp, features: &FeatureMap, policy: &Policy) -> Result<Vec<f64>> {
    if let Policy::Mixture { components, weights } = policy {
        let mut mu = vec![0.0; features.dim()];
        for (c, w) in components.iter().zip(weights) {
            let part = exact_vec(mdp, features, c)?;
            mu.iter_mut().zip(&part).for_each(|(m, p)| *m += w * p);
        }
        return Ok(mu);
    }
    let per_state = state_feature_expectations(mdp, features, policy)?;
    Ok((0..features.dim())
        .map(|j| crate::dot(per_state.column(j).as_slice(), mdp.start_dist()))
        .collect())
}

/// `mu(pi) = sum_s D(s) mu(pi | s)` from the linear fixed point. Mixtures
/// combine their components linearly.
pub fn exact_feature_expectation(mdp: &Mdp, features: &FeatureMap, policy: &Policy) -> Result<FeatureExpectation> {
    features.check_matches(mdp)?;
    policy.validate(mdp)?;
    Ok(FeatureExpectation {
        vec: exact_vec(mdp, features, policy)?,
        accuracy: Some(0.0),
        confidence: Some(0.0),
        method: Method::Exact,
        samples: 0,
        horizon: None,
    })
}

fn accumulate_episode(
    mdp: &Mdp,
    features: &FeatureMap,
    policy: &Policy,
    horizon: usize,
    rng: &mut SimRng,
    acc: &mut [f64],
) {
    let pi = policy.episode_policy(rng);
    let gamma = mdp.discount();
    let mut s = mdp.sample_start(rng);
    let mut weight = 1.0;
    for t in 0..=horizon {
        let a = pi.sample_action(s, rng);
        acc.iter_mut()
            .zip(features.phi(s, a))
            .for_each(|(x, f)| *x += weight * f);
        if t < horizon {
            s = mdp.step_unchecked(s, a, rng);
            weight *= gamma;
        }
    }
}

/// Monte Carlo estimate with `||result - mu(pi)||_2 <= eps` with probability
/// at least `1 - delta`.
pub fn mc_feature_expectation(
    mdp: &Mdp,
    features: &FeatureMap,
    policy: &Policy,
    eps: f64,
    delta: f64,
    rng: &mut SimRng,
) -> Result<FeatureExpectation> {
    mc_feature_expectation_with(Exec::default(), mdp, features, policy, eps, delta, rng)
}

pub fn mc_feature_expectation_with(
    exec: Exec,
    mdp: &Mdp,
    features: &FeatureMap,
    policy: &Policy,
    eps: f64,
    delta: f64,
    rng: &mut SimRng,
) -> Result<FeatureExpectation> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid(format!("eps {eps} is not in (0, 1)")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta {delta} is not in (0, 1)")));
    }
    let horizon = truncation_horizon(eps, mdp.discount())?;
    features.check_matches(mdp)?;
    policy.validate(mdp)?;
    let k = features.dim();
    let episodes = mc_sample_count(k, mdp.discount(), eps, delta);
    let vec = mean_discounted_sum(exec, mdp, features, policy, horizon, episodes, rng);
    Ok(FeatureExpectation {
        vec,
        accuracy: Some(eps),
        confidence: Some(delta),
        method: Method::MonteCarlo,
        samples: episodes,
        horizon: Some(horizon),
    })
}

/// Average of `episodes` truncated discounted feature sums. Chunk partial sums
/// are reduced in chunk order.
pub fn mean_discounted_sum(
    exec: Exec,
    mdp: &Mdp,
    features: &FeatureMap,
    policy: &Policy,
    horizon: usize,
    episodes: usize,
    rng: &mut SimRng,
) -> Vec<f64> {
    let k = features.dim();
    let root = fork_seed(rng);
    let chunks = episodes.div_ceil(EPISODES_PER_CHUNK);
    let partials = map_indexed(exec, chunks, |c| {
        let mut stream = substream(root, c as u64);
        let mut acc = vec![0.0; k];
        let count = EPISODES_PER_CHUNK.min(episodes - c * EPISODES_PER_CHUNK);
        for _ in 0..count {
            accumulate_episode(mdp, features, policy, horizon, &mut stream, &mut acc);
        }
        acc
    });
    let mut total = vec![0.0; k];
    for part in &partials {
        total.iter_mut().zip(part).for_each(|(t, p)| *t += p);
    }
    let m = episodes.max(1) as f64;
    total.iter_mut().for_each(|t| *t /= m);
    total
}

/// `(1/m) sum_i sum_{t=0}^{H_i} gamma^t phi(s_i^t, a_i^t)` over recorded
/// demonstrations.
pub fn expert_estimate(demos: &[Trajectory], features: &FeatureMap, gamma: f64) -> Result<FeatureExpectation> {
    if demos.is_empty() {
        return Err(Error::invalid("expert estimate needs at least one demonstration"));
    }
    let k = features.dim();
    let mut total = vec![0.0; k];
    for traj in demos {
        let mut weight = 1.0;
        for &(s, a) in &traj.steps {
            if s >= features.num_states() || a >= features.num_actions() {
                return Err(Error::Index {
                    what: "demonstration step",
                    index: s.max(a),
                    size: features.num_states().max(features.num_actions()),
                });
            }
            total
                .iter_mut()
                .zip(features.phi(s, a))
                .for_each(|(x, f)| *x += weight * f);
            weight *= gamma;
        }
    }
    let m = demos.len() as f64;
    total.iter_mut().for_each(|x| *x /= m);
    let horizon = demos.iter().map(Trajectory::horizon).min();
    Ok(FeatureExpectation {
        vec: total,
        accuracy: None,
        confidence: None,
        method: Method::FromDemos,
        samples: demos.len(),
        horizon,
    })
}

/// Error radius that holds with probability `1 - delta` for an average of `m`
/// demonstrations truncated at `horizon`: the Hoeffding radius of
/// [`mc_sample_count`] solved for `eps/2`, plus the truncation tail.
pub fn demo_accuracy(k: usize, gamma: f64, m: usize, delta: f64, horizon: usize) -> f64 {
    let k = k as f64;
    let sampling = (2.0 * k * (2.0 * k / delta).ln() / m as f64).sqrt() / (1.0 - gamma);
    sampling + gamma.powi(horizon as i32 + 1) / (1.0 - gamma)
}
