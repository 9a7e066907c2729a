//! Certified planning and exact policy evaluation.
//!
//! Value iteration stops once `||V_{t+1} - V_t||_inf <= eps (1-gamma)^2 / (2 gamma^2)`.
//! Then `||V_{t+1} - V*|| <= gamma ||V_{t+1} - V_t|| / (1 - gamma)` and the
//! greedy policy loses at most `2 gamma ||V_{t+1} - V*|| / (1 - gamma)`, which
//! together give an `eps`-optimal policy at every state.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::solve_discounted;
use crate::mdp::{Mdp, Policy, RewardTable};

const MAX_SWEEPS: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueFunction {
    pub v: Vec<f64>,
}

impl ValueFunction {
    /// `sum_s D(s) V(s)`.
    pub fn expected(&self, start_dist: &[f64]) -> f64 {
        crate::dot(&self.v, start_dist)
    }
}

#[derive(Debug, Clone)]
pub struct PlanReport {
    pub policy: Policy,
    /// Last value iterate.
    pub value: Vec<f64>,
    pub sweeps: usize,
    pub threshold: f64,
}

/// Sup-norm stopping threshold for a target suboptimality `eps_rl`.
pub fn stopping_threshold(eps_rl: f64, discount: f64) -> f64 {
    if discount == 0.0 {
        f64::INFINITY
    } else {
        eps_rl * (1.0 - discount).powi(2) / (2.0 * discount * discount)
    }
}

fn bellman_backup(mdp: &Mdp, reward: &RewardTable, v: &[f64], s: usize, a: usize) -> f64 {
    reward.get(s, a) + mdp.discount() * crate::dot(mdp.row(s, a), v)
}

/// Greedy policy with respect to `v`; ties go to the lowest action index.
pub fn greedy_policy(mdp: &Mdp, reward: &RewardTable, v: &[f64]) -> Policy {
    let actions = (0..mdp.num_states())
        .map(|s| {
            let mut best = (0, f64::NEG_INFINITY);
            for a in 0..mdp.num_actions() {
                let q = bellman_backup(mdp, reward, v, s, a);
                if q > best.1 {
                    best = (a, q);
                }
            }
            best.0
        })
        .collect();
    Policy::Deterministic { actions }
}

/// Value iteration from `V = 0` followed by greedy extraction.
pub fn value_iteration(mdp: &Mdp, reward: &RewardTable, eps_rl: f64) -> Result<PlanReport> {
    if !(eps_rl > 0.0 && eps_rl < 1.0) {
        return Err(Error::invalid(format!("eps_rl {eps_rl} is not in (0, 1)")));
    }
    reward.check_matches(mdp)?;
    let threshold = stopping_threshold(eps_rl, mdp.discount());
    let n = mdp.num_states();
    let mut v = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut sweeps = 0;
    loop {
        for (s, slot) in next.iter_mut().enumerate() {
            *slot = (0..mdp.num_actions())
                .map(|a| bellman_backup(mdp, reward, &v, s, a))
                .fold(f64::NEG_INFINITY, f64::max);
        }
        sweeps += 1;
        let delta = v.iter().zip(&next).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        std::mem::swap(&mut v, &mut next);
        if delta <= threshold {
            break;
        }
        if sweeps >= MAX_SWEEPS {
            return Err(Error::Numerical(format!(
                "value iteration stalled at delta {delta:e} after {sweeps} sweeps"
            )));
        }
    }
    let policy = greedy_policy(mdp, reward, &v);
    Ok(PlanReport {
        policy,
        value: v,
        sweeps,
        threshold,
    })
}

/// A deterministic policy whose value is within `eps_rl` of optimal at every
/// state.
pub fn solve_eps_optimal(mdp: &Mdp, reward: &RewardTable, eps_rl: f64) -> Result<Policy> {
    value_iteration(mdp, reward, eps_rl).map(|r| r.policy)
}

/// Exact `V^pi`, solving `(I - gamma P_pi) v = r_pi`. Mixtures evaluate to the
/// weighted sum of their components.
pub fn policy_value(mdp: &Mdp, reward: &RewardTable, policy: &Policy) -> Result<ValueFunction> {
    reward.check_matches(mdp)?;
    policy.validate(mdp)?;
    policy_value_unchecked(mdp, reward, policy)
}

fn policy_value_unchecked(mdp: &Mdp, reward: &RewardTable, policy: &Policy) -> Result<ValueFunction> {
    if let Policy::Mixture { components, weights } = policy {
        let mut v = vec![0.0; mdp.num_states()];
        for (c, w) in components.iter().zip(weights) {
            let vc = policy_value_unchecked(mdp, reward, c)?;
            v.iter_mut().zip(&vc.v).for_each(|(a, b)| *a += w * b);
        }
        return Ok(ValueFunction { v });
    }
    let n = mdp.num_states();
    let mut r = DMatrix::zeros(n, 1);
    for s in 0..n {
        r[(s, 0)] = (0..mdp.num_actions())
            .map(|a| policy.action_prob(s, a).unwrap_or(0.0) * reward.get(s, a))
            .sum();
    }
    let x = solve_discounted(mdp, policy, r)?;
    Ok(ValueFunction {
        v: x.column(0).iter().copied().collect(),
    })
}
