//! Tabular MDPs without a reward, linear features, policies and sampling.
//!
//! Transition rows are stored flat in `(s, a, s')` order together with their
//! cumulative sums, so a generative-model call is one uniform draw and a
//! binary search.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{sample_cdf, SimRng};

/// Tolerance on probability rows built in code.
pub const PROB_TOL: f64 = 1e-9;
/// Rows read from a file within this distance of 1 are renormalized.
pub const LOAD_RENORM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    num_states: usize,
    num_actions: usize,
    transition: Vec<f64>,
    cdf: Vec<f64>,
    discount: f64,
    start_dist: Vec<f64>,
    start_cdf: Vec<f64>,
}

fn check_distribution(row: &[f64], what: &str) -> Result<()> {
    if let Some(p) = row.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
        return Err(Error::invalid(format!("{what} has invalid entry {p}")));
    }
    let total: f64 = row.iter().sum();
    if (total - 1.0).abs() > PROB_TOL {
        return Err(Error::invalid(format!("{what} sums to {total}, not 1")));
    }
    Ok(())
}

fn cumulative(row: &[f64]) -> impl Iterator<Item = f64> + '_ {
    row.iter().scan(0.0, |acc, p| {
        *acc += p;
        Some(*acc)
    })
}

impl Mdp {
    /// Builds an MDP from a flat `S*A*S` transition table.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        transition: Vec<f64>,
        discount: f64,
        start_dist: Vec<f64>,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::invalid("an MDP needs at least one state and one action"));
        }
        if !(0.0..1.0).contains(&discount) {
            return Err(Error::invalid(format!("discount {discount} is not in [0, 1)")));
        }
        let expected = num_states * num_actions * num_states;
        if transition.len() != expected {
            return Err(Error::Dimension {
                what: "transition table",
                expected,
                got: transition.len(),
            });
        }
        if start_dist.len() != num_states {
            return Err(Error::Dimension {
                what: "start distribution",
                expected: num_states,
                got: start_dist.len(),
            });
        }
        for (row_idx, row) in transition.chunks(num_states).enumerate() {
            let (s, a) = (row_idx / num_actions, row_idx % num_actions);
            check_distribution(row, &format!("transition row ({s}, {a})"))?;
        }
        check_distribution(&start_dist, "start distribution")?;

        let cdf = transition.chunks(num_states).flat_map(cumulative).collect();
        let start_cdf = cumulative(&start_dist).collect();
        Ok(Self {
            num_states,
            num_actions,
            transition,
            cdf,
            discount,
            start_dist,
            start_cdf,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn start_dist(&self) -> &[f64] {
        &self.start_dist
    }

    /// Same dynamics with a different discount factor.
    pub fn with_discount(&self, discount: f64) -> Result<Self> {
        Mdp::new(
            self.num_states,
            self.num_actions,
            self.transition.clone(),
            discount,
            self.start_dist.clone(),
        )
    }

    /// Same dynamics with a different start distribution.
    pub fn with_start_dist(&self, start_dist: Vec<f64>) -> Result<Self> {
        Mdp::new(
            self.num_states,
            self.num_actions,
            self.transition.clone(),
            self.discount,
            start_dist,
        )
    }

    /// `p(. | s, a)`. Panics on out-of-range indices.
    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.num_actions + a) * self.num_states;
        &self.transition[start..start + self.num_states]
    }

    pub fn transition(&self) -> &[f64] {
        &self.transition
    }

    pub(crate) fn check_state(&self, s: usize) -> Result<()> {
        if s >= self.num_states {
            return Err(Error::Index {
                what: "state",
                index: s,
                size: self.num_states,
            });
        }
        Ok(())
    }

    pub(crate) fn check_action(&self, a: usize) -> Result<()> {
        if a >= self.num_actions {
            return Err(Error::Index {
                what: "action",
                index: a,
                size: self.num_actions,
            });
        }
        Ok(())
    }

    /// One generative-model call: draws `s' ~ p(. | s, a)`.
    pub fn sample_next_state(&self, s: usize, a: usize, rng: &mut SimRng) -> Result<usize> {
        self.check_state(s)?;
        self.check_action(a)?;
        Ok(self.step_unchecked(s, a, rng))
    }

    #[inline]
    pub(crate) fn step_unchecked(&self, s: usize, a: usize, rng: &mut SimRng) -> usize {
        let start = (s * self.num_actions + a) * self.num_states;
        sample_cdf(&self.cdf[start..start + self.num_states], rng)
    }

    #[inline]
    pub(crate) fn sample_start(&self, rng: &mut SimRng) -> usize {
        sample_cdf(&self.start_cdf, rng)
    }

    /// Parses the JSON MDP format. Rows within [`LOAD_RENORM_TOL`] of summing
    /// to one are renormalized; anything further off is rejected.
    pub fn from_json_str(text: &str) -> Result<(Mdp, Option<FeatureMap>)> {
        let file: MdpFile = serde_json::from_str(text)?;
        file.into_parts()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Mdp, Option<FeatureMap>)> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn to_file(&self, features: Option<&FeatureMap>) -> MdpFile {
        MdpFile {
            num_states: self.num_states,
            num_actions: self.num_actions,
            gamma: self.discount,
            start_dist: self.start_dist.clone(),
            transition: self.transition.chunks(self.num_states).map(<[f64]>::to_vec).collect(),
            features: features.map(|f| f.data.chunks(f.dim).map(<[f64]>::to_vec).collect()),
        }
    }
}

/// On-disk MDP layout. `transition` and `features` hold one row per
/// state-action pair, in `s * num_actions + a` order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MdpFile {
    pub num_states: usize,
    pub num_actions: usize,
    pub gamma: f64,
    pub start_dist: Vec<f64>,
    pub transition: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<Vec<f64>>>,
}

fn renormalize(row: &mut [f64], what: &str) -> Result<()> {
    let total: f64 = row.iter().sum();
    if !total.is_finite() || (total - 1.0).abs() > LOAD_RENORM_TOL {
        return Err(Error::invalid(format!("{what} sums to {total}, not 1")));
    }
    // rows already within construction tolerance are kept bit-for-bit
    if (total - 1.0).abs() > PROB_TOL {
        row.iter_mut().for_each(|p| *p /= total);
    }
    Ok(())
}

impl MdpFile {
    pub fn into_parts(self) -> Result<(Mdp, Option<FeatureMap>)> {
        let (s_n, a_n) = (self.num_states, self.num_actions);
        if self.transition.len() != s_n * a_n {
            return Err(Error::Dimension {
                what: "transition rows",
                expected: s_n * a_n,
                got: self.transition.len(),
            });
        }
        let mut transition = Vec::with_capacity(s_n * a_n * s_n);
        for (idx, mut row) in self.transition.into_iter().enumerate() {
            if row.len() != s_n {
                return Err(Error::Dimension {
                    what: "transition row",
                    expected: s_n,
                    got: row.len(),
                });
            }
            renormalize(&mut row, &format!("transition row {idx}"))?;
            transition.extend(row);
        }
        let mut start = self.start_dist;
        renormalize(&mut start, "start_dist")?;
        let mdp = Mdp::new(s_n, a_n, transition, self.gamma, start)?;

        let features = match self.features {
            None => None,
            Some(rows) => {
                if rows.len() != s_n * a_n {
                    return Err(Error::Dimension {
                        what: "feature rows",
                        expected: s_n * a_n,
                        got: rows.len(),
                    });
                }
                let dim = rows.first().map_or(0, Vec::len);
                if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
                    return Err(Error::Dimension {
                        what: "feature row",
                        expected: dim,
                        got: bad.len(),
                    });
                }
                Some(FeatureMap::new(s_n, a_n, dim, rows.concat())?)
            }
        };
        Ok((mdp, features))
    }
}

/// Feature vectors `phi(s, a)` in `[0, 1]^k` with Euclidean norm at most 1.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    num_states: usize,
    num_actions: usize,
    dim: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(num_states: usize, num_actions: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("feature dimension must be positive"));
        }
        let expected = num_states * num_actions * dim;
        if data.len() != expected {
            return Err(Error::Dimension {
                what: "feature table",
                expected,
                got: data.len(),
            });
        }
        for (idx, row) in data.chunks(dim).enumerate() {
            if let Some(x) = row.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                return Err(Error::invalid(format!(
                    "feature entry {x} of row {idx} is outside [0, 1]"
                )));
            }
            let norm = crate::norm2(row);
            if norm > 1.0 + 1e-12 {
                return Err(Error::invalid(format!("feature row {idx} has l2-norm {norm} > 1")));
            }
        }
        Ok(Self {
            num_states,
            num_actions,
            dim,
            data,
        })
    }

    /// Number of features `k`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// `phi(s, a)`. Panics on out-of-range indices.
    #[inline]
    pub fn phi(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.num_actions + a) * self.dim;
        &self.data[start..start + self.dim]
    }

    pub(crate) fn check_matches(&self, mdp: &Mdp) -> Result<()> {
        if self.num_states != mdp.num_states() || self.num_actions != mdp.num_actions() {
            return Err(Error::invalid(format!(
                "feature map is {}x{} but the MDP is {}x{}",
                self.num_states,
                self.num_actions,
                mdp.num_states(),
                mdp.num_actions()
            )));
        }
        Ok(())
    }
}

/// Reward `R(s, a)` for every state-action pair.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardTable {
    num_states: usize,
    num_actions: usize,
    values: Vec<f64>,
}

impl RewardTable {
    pub fn new(num_states: usize, num_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != num_states * num_actions {
            return Err(Error::Dimension {
                what: "reward table",
                expected: num_states * num_actions,
                got: values.len(),
            });
        }
        Ok(Self {
            num_states,
            num_actions,
            values,
        })
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.num_actions + a]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    pub(crate) fn check_matches(&self, mdp: &Mdp) -> Result<()> {
        if self.num_states != mdp.num_states() || self.num_actions != mdp.num_actions() {
            return Err(Error::invalid("reward table does not match the MDP"));
        }
        Ok(())
    }
}

/// `R(s, a) = w . phi(s, a)`.
pub fn linear_reward(features: &FeatureMap, w: &[f64]) -> Result<RewardTable> {
    if w.len() != features.dim() {
        return Err(Error::Dimension {
            what: "reward weights",
            expected: features.dim(),
            got: w.len(),
        });
    }
    let values = features
        .data
        .chunks(features.dim)
        .map(|phi| crate::dot(phi, w))
        .collect();
    RewardTable::new(features.num_states, features.num_actions, values)
}

/// A policy. Mixtures pick one component per episode and follow it
/// throughout, so they are not stationary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Policy {
    Deterministic {
        actions: Vec<usize>,
    },
    Stochastic {
        num_actions: usize,
        /// Row-major `S x A` action probabilities.
        probs: Vec<f64>,
    },
    Mixture {
        components: Vec<Policy>,
        weights: Vec<f64>,
    },
}

impl Policy {
    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        Policy::Stochastic {
            num_actions,
            probs: vec![1.0 / num_actions as f64; num_states * num_actions],
        }
    }

    pub fn stochastic(num_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if num_actions == 0 || !probs.len().is_multiple_of(num_actions) {
            return Err(Error::invalid("stochastic policy table has the wrong shape"));
        }
        for (s, row) in probs.chunks(num_actions).enumerate() {
            check_distribution(row, &format!("policy row {s}"))?;
        }
        Ok(Policy::Stochastic { num_actions, probs })
    }

    /// Checks shape and invariants against an MDP.
    pub fn validate(&self, mdp: &Mdp) -> Result<()> {
        match self {
            Policy::Deterministic { actions } => {
                if actions.len() != mdp.num_states() {
                    return Err(Error::Dimension {
                        what: "deterministic policy",
                        expected: mdp.num_states(),
                        got: actions.len(),
                    });
                }
                actions.iter().try_for_each(|&a| mdp.check_action(a))
            }
            Policy::Stochastic { num_actions, probs } => {
                if *num_actions != mdp.num_actions() || probs.len() != mdp.num_states() * num_actions {
                    return Err(Error::Dimension {
                        what: "stochastic policy",
                        expected: mdp.num_states() * mdp.num_actions(),
                        got: probs.len(),
                    });
                }
                for (s, row) in probs.chunks(*num_actions).enumerate() {
                    check_distribution(row, &format!("policy row {s}"))?;
                }
                Ok(())
            }
            Policy::Mixture { components, weights } => {
                check_mixture_weights(components.len(), weights)?;
                components.iter().try_for_each(|c| c.validate(mdp))
            }
        }
    }

    /// `pi(a | s)` for stationary policies; `None` for mixtures.
    pub fn action_prob(&self, s: usize, a: usize) -> Option<f64> {
        match self {
            Policy::Deterministic { actions } => Some(if actions[s] == a { 1.0 } else { 0.0 }),
            Policy::Stochastic { num_actions, probs } => Some(probs[s * num_actions + a]),
            Policy::Mixture { .. } => None,
        }
    }

    /// Resolves the stationary policy followed for one episode.
    pub(crate) fn episode_policy<'a>(&'a self, rng: &mut SimRng) -> &'a Policy {
        match self {
            Policy::Mixture { components, weights } => {
                let cdf: Vec<f64> = cumulative(weights).collect();
                components[sample_cdf(&cdf, rng)].episode_policy(rng)
            }
            other => other,
        }
    }

    /// Samples an action for a stationary policy.
    #[inline]
    pub(crate) fn sample_action(&self, s: usize, rng: &mut SimRng) -> usize {
        match self {
            Policy::Deterministic { actions } => actions[s],
            Policy::Stochastic { num_actions, probs } => {
                let row = &probs[s * num_actions..(s + 1) * num_actions];
                let u: f64 = rand::Rng::random(rng);
                let mut acc = 0.0;
                for (a, p) in row.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return a;
                    }
                }
                // rounding left u above the running sum; fall back to the
                // last action with positive mass
                row.iter().rposition(|p| *p > 0.0).unwrap_or(num_actions - 1)
            }
            Policy::Mixture { .. } => unreachable!("mixtures are resolved per episode"),
        }
    }
}

pub(crate) fn check_mixture_weights(n: usize, weights: &[f64]) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("a mixture needs at least one component"));
    }
    if weights.len() != n {
        return Err(Error::Dimension {
            what: "mixture weights",
            expected: n,
            got: weights.len(),
        });
    }
    check_distribution(weights, "mixture weights")
}

/// State-action pairs `(s_t, a_t)` for `t = 0..=H`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<(usize, usize)>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.steps.len().saturating_sub(1)
    }
}

/// Runs one episode of `horizon + 1` steps from the start distribution.
pub fn rollout(mdp: &Mdp, policy: &Policy, horizon: usize, rng: &mut SimRng) -> Result<Trajectory> {
    policy.validate(mdp)?;
    Ok(rollout_unchecked(mdp, policy, horizon, rng))
}

pub(crate) fn rollout_unchecked(mdp: &Mdp, policy: &Policy, horizon: usize, rng: &mut SimRng) -> Trajectory {
    let pi = policy.episode_policy(rng);
    let mut steps = Vec::with_capacity(horizon + 1);
    let mut s = mdp.sample_start(rng);
    for t in 0..=horizon {
        let a = pi.sample_action(s, rng);
        steps.push((s, a));
        if t < horizon {
            s = mdp.step_unchecked(s, a, rng);
        }
    }
    Trajectory { steps }
}

/// Empirical kernel from `samples_per_pair` generative-model calls per pair:
/// `p_hat(s' | s, a) = count(s') / N`.
pub fn build_empirical_mdp(mdp: &Mdp, samples_per_pair: usize, rng: &mut SimRng) -> Result<Mdp> {
    if samples_per_pair == 0 {
        return Err(Error::invalid("samples_per_pair must be at least 1"));
    }
    let (s_n, a_n) = (mdp.num_states(), mdp.num_actions());
    let mut transition = vec![0.0; s_n * a_n * s_n];
    let mut counts = vec![0usize; s_n];
    for s in 0..s_n {
        for a in 0..a_n {
            counts.iter_mut().for_each(|c| *c = 0);
            for _ in 0..samples_per_pair {
                counts[mdp.step_unchecked(s, a, rng)] += 1;
            }
            let row = &mut transition[(s * a_n + a) * s_n..(s * a_n + a + 1) * s_n];
            for (p, c) in row.iter_mut().zip(&counts) {
                *p = *c as f64 / samples_per_pair as f64;
            }
        }
    }
    Mdp::new(s_n, a_n, transition, mdp.discount(), mdp.start_dist().to_vec())
}
