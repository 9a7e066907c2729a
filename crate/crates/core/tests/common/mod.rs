#![allow(dead_code)]

use apprentice_core::{FeatureMap, Mdp, Policy};
use apprentice_oracles::Model;

pub fn model(mdp: &Mdp) -> Model {
    Model {
        num_states: mdp.num_states(),
        num_actions: mdp.num_actions(),
        gamma: mdp.discount(),
        transition: mdp.transition().to_vec(),
        start: mdp.start_dist().to_vec(),
    }
}

pub fn feature_table(features: &FeatureMap) -> Vec<f64> {
    (0..features.num_states())
        .flat_map(|s| (0..features.num_actions()).flat_map(move |a| features.phi(s, a).to_vec()))
        .collect()
}

/// Action table of a stationary policy.
pub fn policy_table(policy: &Policy, num_states: usize, num_actions: usize) -> Vec<f64> {
    (0..num_states)
        .flat_map(|s| (0..num_actions).map(move |a| (s, a)))
        .map(|(s, a)| policy.action_prob(s, a).expect("stationary policy"))
        .collect()
}

/// Oracle feature expectation, mixtures included.
pub fn oracle_mu(mdp: &Mdp, features: &FeatureMap, policy: &Policy) -> Vec<f64> {
    match policy {
        Policy::Mixture { components, weights } => {
            let mut mu = vec![0.0; features.dim()];
            for (c, w) in components.iter().zip(weights) {
                let part = oracle_mu(mdp, features, c);
                mu.iter_mut().zip(&part).for_each(|(m, p)| *m += w * p);
            }
            mu
        }
        _ => model(mdp).feature_expectation(
            &feature_table(features),
            features.dim(),
            &policy_table(policy, mdp.num_states(), mdp.num_actions()),
        ),
    }
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
