//! Apprenticeship learning via inverse reinforcement learning on tabular MDPs
//! with linear reward features.
//!
//! The crate provides the building blocks of the max-margin apprenticeship
//! loop (exact and Monte Carlo feature expectations, a minimum-norm-point
//! margin solver, a certified value-iteration planner), the loop itself in an
//! ideal and an approximate mode, numerical certificates for its convergence
//! theory, and an analytical classical-versus-quantum cost model.
//!
//! Monte Carlo estimation and grid evaluations run on rayon when the
//! `parallel` feature is enabled (the default). Every parallel reduction is
//! performed in a fixed order, so results are bit-identical with and without
//! the feature.

// `!(x > 0.0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod apprentice;
pub mod diagnostics;
pub mod environments;
pub mod error;
pub mod features;
mod linalg;
pub mod margin;
pub mod mdp;
pub mod par;
pub mod quantum_cost;
pub mod rl;
pub mod rng;

pub use error::{Error, Result};
pub use mdp::{FeatureMap, Mdp, Policy, RewardTable, Trajectory};
pub use rng::SimRng;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}
