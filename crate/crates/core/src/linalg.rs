//! Dense solves for discounted policy systems `(I - gamma P_pi) X = B`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mdp::{Mdp, Policy};

/// Largest accepted residual `max |(I - gamma P) X - B|`, relative to
/// `max(1, max |X|)`.
pub(crate) const RESIDUAL_TOL: f64 = 1e-8;

/// `P_pi(s, s') = sum_a pi(a|s) p(s'|s,a)` for a stationary policy.
pub(crate) fn policy_kernel(mdp: &Mdp, policy: &Policy) -> Result<DMatrix<f64>> {
    let n = mdp.num_states();
    let mut p = DMatrix::zeros(n, n);
    for s in 0..n {
        for a in 0..mdp.num_actions() {
            let prob = policy
                .action_prob(s, a)
                .ok_or_else(|| Error::invalid("mixture policies have no stationary kernel"))?;
            if prob == 0.0 {
                continue;
            }
            for (s2, q) in mdp.row(s, a).iter().enumerate() {
                p[(s, s2)] += prob * q;
            }
        }
    }
    Ok(p)
}

/// Solves `(I - gamma P_pi) X = rhs` and checks the residual.
pub(crate) fn solve_discounted(mdp: &Mdp, policy: &Policy, rhs: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = mdp.num_states();
    let p = policy_kernel(mdp, policy)?;
    let system = DMatrix::identity(n, n) - p * mdp.discount();
    let x = system
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("singular policy system".into()))?;
    let residual = (&system * &x - &rhs).amax();
    let scale = x.amax().max(1.0);
    if !residual.is_finite() || residual > RESIDUAL_TOL * scale {
        return Err(Error::Numerical(format!(
            "policy system residual {residual:e} exceeds tolerance"
        )));
    }
    Ok(x)
}
