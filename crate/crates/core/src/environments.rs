//! Benchmark instances and synthetic experts.

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{linear_reward, rollout_unchecked, FeatureMap, Mdp, Policy, Trajectory};
use crate::rl::solve_eps_optimal;
use crate::rng::{seeded, SimRng};

/// Action order for gridworlds.
pub const NORTH: usize = 0;
pub const EAST: usize = 1;
pub const SOUTH: usize = 2;
pub const WEST: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridworldSpec {
    pub width: usize,
    pub height: usize,
    pub macrocell_size: usize,
    /// Probability of a uniformly random other direction instead of the
    /// chosen one.
    pub noise: f64,
    pub discount: f64,
    /// Reward weights over macrocells, `||w||_1 <= 1`.
    pub hidden_w: Vec<f64>,
}

impl GridworldSpec {
    pub fn num_macrocells(&self) -> usize {
        (self.width / self.macrocell_size.max(1)) * (self.height / self.macrocell_size.max(1))
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.macrocell_size == 0 {
            return Err(Error::invalid("gridworld dimensions must be positive"));
        }
        if !self.width.is_multiple_of(self.macrocell_size) || !self.height.is_multiple_of(self.macrocell_size) {
            return Err(Error::invalid(format!(
                "macrocell size {} does not divide the {}x{} grid",
                self.macrocell_size, self.width, self.height
            )));
        }
        if !(0.0..1.0).contains(&self.noise) {
            return Err(Error::invalid(format!("noise {} is not in [0, 1)", self.noise)));
        }
        if self.hidden_w.len() != self.num_macrocells() {
            return Err(Error::Dimension {
                what: "hidden_w",
                expected: self.num_macrocells(),
                got: self.hidden_w.len(),
            });
        }
        check_l1(&self.hidden_w)
    }
}

fn check_l1(w: &[f64]) -> Result<()> {
    let l1: f64 = w.iter().map(|x| x.abs()).sum();
    if !(l1 <= 1.0 + 1e-12) {
        return Err(Error::invalid(format!("hidden_w has l1-norm {l1} > 1")));
    }
    Ok(())
}

/// Grid of `width x height` cells, four compass moves, one-hot macrocell
/// features. The start distribution is a point mass on cell `(0, 0)`.
pub fn make_gridworld(spec: &GridworldSpec) -> Result<(Mdp, FeatureMap)> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let n = w * h;
    let moves: [(isize, isize); 4] = [(0, -1), (1, 0), (0, 1), (-1, 0)];
    let target = |s: usize, dir: usize| {
        let (x, y) = ((s % w) as isize, (s / w) as isize);
        let (nx, ny) = (x + moves[dir].0, y + moves[dir].1);
        if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
            s
        } else {
            ny as usize * w + nx as usize
        }
    };

    let mut transition = vec![0.0; n * 4 * n];
    for s in 0..n {
        for a in 0..4 {
            let row = &mut transition[(s * 4 + a) * n..(s * 4 + a + 1) * n];
            for dir in 0..4 {
                let p = if dir == a { 1.0 - spec.noise } else { spec.noise / 3.0 };
                row[target(s, dir)] += p;
            }
        }
    }
    let mut start = vec![0.0; n];
    start[0] = 1.0;
    let mdp = Mdp::new(n, 4, transition, spec.discount, start)?;

    let m = spec.macrocell_size;
    let k = spec.num_macrocells();
    let cols = w / m;
    let mut data = vec![0.0; n * 4 * k];
    for s in 0..n {
        let cell = (s / w / m) * cols + (s % w) / m;
        for a in 0..4 {
            data[(s * 4 + a) * k + cell] = 1.0;
        }
    }
    let features = FeatureMap::new(n, 4, k, data)?;
    Ok((mdp, features))
}

/// Random sparse MDP: each `(s, a)` row is supported on `outdegree` distinct
/// states with Dirichlet(1) weights. Features are uniform on `[0, 1]^k`,
/// rescaled per row to l2-norm at most 1. Start distribution is uniform.
pub fn make_random_mdp(
    num_states: usize,
    num_actions: usize,
    k: usize,
    outdegree: usize,
    discount: f64,
    seed: u64,
) -> Result<(Mdp, FeatureMap)> {
    if outdegree == 0 || outdegree > num_states {
        return Err(Error::invalid(format!(
            "outdegree {outdegree} must be in 1..={num_states}"
        )));
    }
    let mut rng = seeded(seed);
    let n = num_states;
    let mut transition = vec![0.0; n * num_actions * n];
    for row in transition.chunks_mut(n) {
        let support = sample_indices(&mut rng, n, outdegree);
        let weights: Vec<f64> = (0..outdegree).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let total: f64 = weights.iter().sum();
        for (idx, wgt) in support.iter().zip(&weights) {
            row[idx] = wgt / total;
        }
    }
    let mdp = Mdp::new(n, num_actions, transition, discount, vec![1.0 / n as f64; n])?;

    let mut data: Vec<f64> = (0..n * num_actions * k).map(|_| rng.random::<f64>()).collect();
    for row in data.chunks_mut(k.max(1)) {
        let norm = crate::norm2(row);
        if norm > 1.0 {
            row.iter_mut().for_each(|x| *x /= norm);
        }
    }
    let features = FeatureMap::new(n, num_actions, k, data)?;
    Ok((mdp, features))
}

/// Non-negative weights with `||w||_1 = scale`.
pub fn random_weights(k: usize, scale: f64, rng: &mut SimRng) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| scale * x / total).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertBundle {
    pub expert_policy: Policy,
    pub hidden_w: Vec<f64>,
    pub demos: Vec<Trajectory>,
}

/// An `eps_rl`-optimal expert for `R = Phi w` and `m` demonstrations of
/// `horizon + 1` steps each.
pub fn make_expert(
    mdp: &Mdp,
    features: &FeatureMap,
    hidden_w: &[f64],
    eps_rl: f64,
    m: usize,
    horizon: usize,
    rng: &mut SimRng,
) -> Result<ExpertBundle> {
    check_l1(hidden_w)?;
    let reward = linear_reward(features, hidden_w)?;
    let expert_policy = solve_eps_optimal(mdp, &reward, eps_rl)?;
    let demos = (0..m)
        .map(|_| rollout_unchecked(mdp, &expert_policy, horizon, rng))
        .collect();
    Ok(ExpertBundle {
        expert_policy,
        hidden_w: hidden_w.to_vec(),
        demos,
    })
}
