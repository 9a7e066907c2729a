//! Analytical cost model: classical versus quantum apprenticeship learning.
//!
//! Every formula is an asymptotic query or time count with log factors
//! dropped and all hidden constants set to 1. The model compares scaling
//! shapes; it does not predict wall-clock time.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{map_indexed, Exec};

pub const REPORT_HEADER: &str =
    "asymptotic costs with log factors dropped and unit constants; shapes only, not wall-clock predictions";

pub const REPORT_FOOTER: &str = "per-iteration totals are closed forms in (k, S, A, gamma, eps, eps_rl); \
they are not the sum of the subroutine rows, whose margin-solver term depends on the iteration count n";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    pub k: usize,
    #[serde(rename = "S")]
    pub num_states: usize,
    #[serde(rename = "A")]
    pub num_actions: usize,
    pub gamma: f64,
    pub epsilon: f64,
    pub epsilon_rl: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Iteration count; defaults to `k / ((1-gamma)^2 (eps^2 - eps_rl))`.
    #[serde(default)]
    pub n: Option<f64>,
}

fn default_delta() -> f64 {
    0.1
}

fn in_unit(x: f64) -> bool {
    x > 0.0 && x < 1.0
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.num_states == 0 || self.num_actions == 0 {
            return Err(Error::invalid("k, S and A must be positive"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::invalid(format!("gamma {} is not in [0, 1)", self.gamma)));
        }
        for (name, v) in [
            ("epsilon", self.epsilon),
            ("epsilon_rl", self.epsilon_rl),
            ("delta", self.delta),
        ] {
            if !in_unit(v) {
                return Err(Error::invalid(format!("{name} {v} is not in (0, 1)")));
            }
        }
        if !(self.epsilon * self.epsilon > self.epsilon_rl) {
            return Err(Error::invalid(format!(
                "cost model needs epsilon^2 > epsilon_rl (epsilon = {}, epsilon_rl = {})",
                self.epsilon, self.epsilon_rl
            )));
        }
        if let Some(n) = self.n {
            if !(n > 0.0 && n.is_finite()) {
                return Err(Error::invalid(format!("n {n} must be positive")));
            }
        }
        Ok(())
    }

    fn gap(&self) -> f64 {
        self.epsilon * self.epsilon - self.epsilon_rl
    }

    /// Iteration count used by the margin-solver rows.
    pub fn iterations(&self) -> f64 {
        self.n
            .unwrap_or_else(|| self.k as f64 / ((1.0 - self.gamma).powi(2) * self.gap()))
    }
}

/// `(k + SA) / ((1-gamma)^7 eps^6 (eps^2 - eps_rl))`.
pub fn classical_iteration_cost(p: &CostParams) -> Result<f64> {
    p.validate()?;
    let sa = (p.num_states * p.num_actions) as f64;
    Ok((p.k as f64 + sa) / ((1.0 - p.gamma).powi(7) * p.epsilon.powi(6) * p.gap()))
}

/// `(sqrt k + S sqrt A) / ((1-gamma)^16 eps^24 (eps^2 - eps_rl)^0.5)`.
pub fn quantum_iteration_cost(p: &CostParams) -> Result<f64> {
    p.validate()?;
    let top = (p.k as f64).sqrt() + p.num_states as f64 * (p.num_actions as f64).sqrt();
    Ok(top / ((1.0 - p.gamma).powi(16) * p.epsilon.powi(24) * p.gap().sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubroutineCost {
    pub name: String,
    pub classical: f64,
    pub quantum: f64,
    /// `classical / quantum`.
    pub speedup: f64,
}

impl SubroutineCost {
    fn new(name: &str, classical: f64, quantum: f64) -> Self {
        Self {
            name: name.to_string(),
            classical,
            quantum,
            speedup: classical / quantum,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub header: String,
    pub params: CostParams,
    pub iterations: f64,
    pub subroutines: Vec<SubroutineCost>,
    pub classical_iteration: f64,
    pub quantum_iteration: f64,
    pub speedup: f64,
    pub footer: String,
}

/// Per-subroutine costs, classical against quantum.
///
/// | subroutine | classical | quantum |
/// |---|---|---|
/// | min finding over `k` | `k` | `sqrt k` |
/// | mean estimation, `L = 1/(1-gamma)` | `L^2 k / eps^2` | `L sqrt k / eps` |
/// | feature expectation | `k / (eps^2 (1-gamma)^3)` | `sqrt k / (eps (1-gamma)^2)` |
/// | margin solver | `(n + k) / eps^2` | `sqrt n / eps^4 + sqrt k / eps^8` |
/// | RL planning | `SA / (eps_rl^2 (1-gamma)^3)` | `S sqrt A / (eps_rl (1-gamma)^1.5)` |
pub fn subroutine_costs(p: &CostParams) -> Result<CostReport> {
    p.validate()?;
    let k = p.k as f64;
    let (s, a) = (p.num_states as f64, p.num_actions as f64);
    let h = 1.0 - p.gamma;
    let l = 1.0 / h;
    let eps = p.epsilon;
    let eps_rl = p.epsilon_rl;
    let n = p.iterations();

    let subroutines = vec![
        SubroutineCost::new("min_finding", k, k.sqrt()),
        SubroutineCost::new("mean_estimation", l * l * k / (eps * eps), l * k.sqrt() / eps),
        SubroutineCost::new(
            "feature_expectation",
            k / (eps * eps * h.powi(3)),
            k.sqrt() / (eps * h * h),
        ),
        SubroutineCost::new(
            "margin_solver",
            (n + k) / (eps * eps),
            n.sqrt() / eps.powi(4) + k.sqrt() / eps.powi(8),
        ),
        SubroutineCost::new(
            "rl_planning",
            s * a / (eps_rl * eps_rl * h.powi(3)),
            s * a.sqrt() / (eps_rl * h.powf(1.5)),
        ),
    ];
    let classical_iteration = classical_iteration_cost(p)?;
    let quantum_iteration = quantum_iteration_cost(p)?;
    Ok(CostReport {
        header: REPORT_HEADER.to_string(),
        params: p.clone(),
        iterations: n,
        subroutines,
        classical_iteration,
        quantum_iteration,
        speedup: classical_iteration / quantum_iteration,
        footer: REPORT_FOOTER.to_string(),
    })
}

/// Cartesian grid of cost parameters. Rows are emitted with `k` varying
/// slowest and `epsilon_rl` fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostGrid {
    pub k: Vec<usize>,
    #[serde(rename = "S")]
    pub num_states: Vec<usize>,
    #[serde(rename = "A")]
    pub num_actions: Vec<usize>,
    pub gamma: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub epsilon_rl: Vec<f64>,
}

impl CostGrid {
    pub fn points(&self) -> Vec<CostParams> {
        let mut out = Vec::new();
        for &k in &self.k {
            for &num_states in &self.num_states {
                for &num_actions in &self.num_actions {
                    for &gamma in &self.gamma {
                        for &epsilon in &self.epsilon {
                            for &epsilon_rl in &self.epsilon_rl {
                                out.push(CostParams {
                                    k,
                                    num_states,
                                    num_actions,
                                    gamma,
                                    epsilon,
                                    epsilon_rl,
                                    delta: default_delta(),
                                    n: None,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossoverRow {
    pub params: CostParams,
    pub classical_cost: f64,
    pub quantum_cost: f64,
    /// `classical_cost / quantum_cost`.
    pub ratio: f64,
    pub quantum_wins: bool,
}

/// Evaluates both per-iteration costs over the grid. Any invalid grid point
/// fails the whole sweep.
pub fn crossover_sweep(grid: &CostGrid) -> Result<Vec<CrossoverRow>> {
    crossover_sweep_with(Exec::default(), grid)
}

pub fn crossover_sweep_with(exec: Exec, grid: &CostGrid) -> Result<Vec<CrossoverRow>> {
    let points = grid.points();
    for p in &points {
        p.validate()
            .map_err(|e| Error::invalid(format!("invalid grid point {p:?}: {e}")))?;
    }
    map_indexed(exec, points.len(), |i| {
        let p = &points[i];
        let classical_cost = classical_iteration_cost(p)?;
        let quantum_cost = quantum_iteration_cost(p)?;
        Ok(CrossoverRow {
            params: p.clone(),
            classical_cost,
            quantum_cost,
            ratio: classical_cost / quantum_cost,
            quantum_wins: quantum_cost < classical_cost,
        })
    })
    .into_iter()
    .collect()
}

pub const CROSSOVER_COLUMNS: &str = "k,S,A,gamma,epsilon,epsilon_rl,classical_cost,quantum_cost,ratio,quantum_wins";

/// Writes the crossover table as CSV with shortest round-trip decimals.
pub fn write_crossover_csv<W: Write>(rows: &[CrossoverRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CROSSOVER_COLUMNS}")?;
    for r in rows {
        let p = &r.params;
        writeln!(
            out,
            "{},{},{},{:?},{:?},{:?},{:?},{:?},{:?},{}",
            p.k,
            p.num_states,
            p.num_actions,
            p.gamma,
            p.epsilon,
            p.epsilon_rl,
            r.classical_cost,
            r.quantum_cost,
            r.ratio,
            r.quantum_wins
        )?;
    }
    Ok(())
}
