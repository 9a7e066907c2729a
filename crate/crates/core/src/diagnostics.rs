//! Numerical certificates for the convergence theory of the max-margin loop.
//!
//! * [`projection_update`] builds the point on the segment from the current
//!   hull point toward the newest feature expectation used in the
//!   per-iteration improvement argument.
//! * [`lemma1_ratio_bound`] is the guaranteed contraction factor of the
//!   distance to the expert estimate.
//! * [`theorem1_iterations`] turns that factor into an explicit iteration
//!   count. All logarithms are natural.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack added to the contraction bound when certifying an iteration.
pub const RATIO_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationDiagnostic {
    pub iteration: usize,
    /// `||mu_E - mu_bar||` before the step.
    pub distance: f64,
    /// `||mu_E - mu_tilde|| / ||mu_E - mu_bar||`.
    pub ratio_observed: f64,
    pub ratio_bound: Option<f64>,
    /// Next hull distance over the current one.
    pub hull_ratio: Option<f64>,
    /// Segment coordinate of `mu_tilde` between `mu_bar` (0) and the new
    /// feature expectation (1).
    pub lambda: f64,
    pub hypotheses_hold: bool,
    pub bound_satisfied: bool,
}

/// `mu_tilde = [((mu_E - mu_bar).(mu_next - mu_bar) - eps_rl) / ||mu_next - mu_bar||^2] (mu_next - mu_bar) + mu_bar`.
pub fn projection_update(mu_e: &[f64], mu_bar: &[f64], mu_next: &[f64], eps_rl: f64) -> Result<Vec<f64>> {
    let (v, _) = projection_with_coefficient(mu_e, mu_bar, mu_next, eps_rl)?;
    Ok(v)
}

/// [`projection_update`] together with its segment coefficient.
pub fn projection_with_coefficient(
    mu_e: &[f64],
    mu_bar: &[f64],
    mu_next: &[f64],
    eps_rl: f64,
) -> Result<(Vec<f64>, f64)> {
    if mu_e.len() != mu_bar.len() || mu_next.len() != mu_bar.len() {
        return Err(Error::Dimension {
            what: "projection inputs",
            expected: mu_bar.len(),
            got: mu_e.len().max(mu_next.len()),
        });
    }
    let dir = crate::sub(mu_next, mu_bar);
    let denom = crate::dot(&dir, &dir);
    if denom == 0.0 {
        return Err(Error::invalid(
            "projection undefined: new feature expectation equals the hull point",
        ));
    }
    let lambda = (crate::dot(&crate::sub(mu_e, mu_bar), &dir) - eps_rl) / denom;
    let point = mu_bar.iter().zip(&dir).map(|(b, d)| b + lambda * d).collect();
    Ok((point, lambda))
}

/// `(sqrt k + (1-gamma) sqrt(eps_rl/2)) / sqrt(k + (1-gamma)^2 (dist^2 - eps_rl))`.
pub fn lemma1_ratio_bound(k: usize, gamma: f64, eps_rl: f64, dist: f64) -> Result<f64> {
    let k = k as f64;
    let h = 1.0 - gamma;
    let radicand = k + h * h * (dist * dist - eps_rl);
    if !(radicand > 0.0) {
        return Err(Error::invalid(format!(
            "contraction bound undefined: radicand {radicand} is not positive"
        )));
    }
    Ok((k.sqrt() + h * (eps_rl / 2.0).sqrt()) / radicand.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationBound {
    /// `ln(sqrt k / ((1-gamma) eps)) / ln(1 / ratio)`.
    pub iterations: f64,
    /// First-order closed form `2k ln(sqrt k / ((1-gamma) eps)) / ((1-gamma)^2 (eps^2 - eps_rl))`.
    pub simplified: f64,
    /// Per-iteration contraction factor at distance `eps`.
    pub ratio: f64,
}

impl IterationBound {
    pub fn ceil(&self) -> usize {
        self.iterations.ceil() as usize
    }
}

/// Explicit iteration bound. Fails with [`Error::VacuousBound`] when the
/// contraction factor is not below 1, which happens when `eps_rl` is large
/// relative to `eps^2`.
pub fn theorem1_iterations(k: usize, gamma: f64, eps: f64, eps_rl: f64) -> Result<IterationBound> {
    if !(eps * eps > eps_rl) {
        return Err(Error::invalid(format!(
            "iteration bound needs eps^2 > eps_rl (eps = {eps}, eps_rl = {eps_rl})"
        )));
    }
    if !(0.0..1.0).contains(&gamma) || k == 0 || eps_rl < 0.0 {
        return Err(Error::invalid(
            "iteration bound needs k >= 1, gamma in [0, 1), eps_rl >= 0",
        ));
    }
    let kf = k as f64;
    let h = 1.0 - gamma;
    let numerator = (kf.sqrt() / (h * eps)).ln().max(0.0);
    let ratio = (kf.sqrt() + h * (eps_rl / 2.0).sqrt()) / (kf + h * h * (eps * eps - eps_rl)).sqrt();
    if !(ratio < 1.0) {
        return Err(Error::VacuousBound { ratio });
    }
    let iterations = numerator / -ratio.ln();
    let simplified = 2.0 * kf * numerator / (h * h * (eps * eps - eps_rl));
    Ok(IterationBound {
        iterations,
        simplified,
        ratio,
    })
}

/// Whether the per-iteration hypotheses are met at distance `dist`:
/// `dist^2 >= 2 eps_rl` and the contraction bound is defined.
pub fn lemma1_hypotheses(dist: f64, eps_rl: f64) -> bool {
    dist * dist >= 2.0 * eps_rl
}
