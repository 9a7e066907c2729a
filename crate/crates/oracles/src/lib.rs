//! Slow, direct reference computations for tabular MDPs and small convex
//! hulls. Nothing here shares code with the library under test; inputs are
//! plain row-major arrays.
//!
//! Layouts: `transition[(s * A + a) * S + s2]`, `features[(s * A + a) * k + i]`,
//! `policy[s * A + a]`, `reward[s * A + a]`.

/// Gaussian elimination with partial pivoting. `None` when a pivot falls
/// below `1e-13` times the largest entry.
#[allow(clippy::needless_range_loop)]
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |m, x| m.max(x.abs()))
        .max(1e-300);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-13 * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[row][c] -= f * a[col][c];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Some(x)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Tabular model in flat form.
#[derive(Debug, Clone)]
pub struct Model {
    pub num_states: usize,
    pub num_actions: usize,
    pub gamma: f64,
    pub transition: Vec<f64>,
    pub start: Vec<f64>,
}

impl Model {
    fn p(&self, s: usize, a: usize, s2: usize) -> f64 {
        self.transition[(s * self.num_actions + a) * self.num_states + s2]
    }

    fn policy_kernel(&self, policy: &[f64]) -> Vec<Vec<f64>> {
        let (n, na) = (self.num_states, self.num_actions);
        (0..n)
            .map(|s| {
                (0..n)
                    .map(|s2| (0..na).map(|a| policy[s * na + a] * self.p(s, a, s2)).sum())
                    .collect()
            })
            .collect()
    }

    /// Discounted state occupancy `d = sum_t gamma^t D P^t`, from the
    /// transposed linear system.
    pub fn occupancy(&self, policy: &[f64]) -> Vec<f64> {
        let n = self.num_states;
        let p = self.policy_kernel(policy);
        let a: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (if i == j { 1.0 } else { 0.0 }) - self.gamma * p[j][i])
                    .collect()
            })
            .collect();
        gauss_solve(a, self.start.clone()).expect("occupancy system is singular")
    }

    /// Exact feature expectation of a stationary policy.
    pub fn feature_expectation(&self, features: &[f64], k: usize, policy: &[f64]) -> Vec<f64> {
        let d = self.occupancy(policy);
        self.weight_features(&d, features, k, policy)
    }

    fn weight_features(&self, d: &[f64], features: &[f64], k: usize, policy: &[f64]) -> Vec<f64> {
        let na = self.num_actions;
        let mut mu = vec![0.0; k];
        for (s, ds) in d.iter().enumerate() {
            for a in 0..na {
                let w = ds * policy[s * na + a];
                let phi = &features[(s * na + a) * k..(s * na + a + 1) * k];
                mu.iter_mut().zip(phi).for_each(|(m, f)| *m += w * f);
            }
        }
        mu
    }

    /// `sum_{t=0}^{H} gamma^t E[phi(s_t, a_t)]` by forward propagation of the
    /// state distribution.
    pub fn finite_horizon_feature_expectation(
        &self,
        features: &[f64],
        k: usize,
        policy: &[f64],
        horizon: usize,
    ) -> Vec<f64> {
        let n = self.num_states;
        let p = self.policy_kernel(policy);
        let mut dist = self.start.clone();
        let mut occ = vec![0.0; n];
        let mut weight = 1.0;
        for _ in 0..=horizon {
            occ.iter_mut().zip(&dist).for_each(|(o, d)| *o += weight * d);
            let next: Vec<f64> = (0..n).map(|j| (0..n).map(|i| dist[i] * p[i][j]).sum()).collect();
            dist = next;
            weight *= self.gamma;
        }
        self.weight_features(&occ, features, k, policy)
    }

    /// `V^pi` from `(I - gamma P_pi) v = r_pi`.
    pub fn evaluate(&self, reward: &[f64], policy: &[f64]) -> Vec<f64> {
        let (n, na) = (self.num_states, self.num_actions);
        let p = self.policy_kernel(policy);
        let a: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (if i == j { 1.0 } else { 0.0 }) - self.gamma * p[i][j])
                    .collect()
            })
            .collect();
        let r: Vec<f64> = (0..n)
            .map(|s| (0..na).map(|a| policy[s * na + a] * reward[s * na + a]).sum())
            .collect();
        gauss_solve(a, r).expect("evaluation system is singular")
    }

    /// Howard policy iteration; returns `V*` and an optimal deterministic
    /// policy as action indices.
    pub fn policy_iteration(&self, reward: &[f64]) -> (Vec<f64>, Vec<usize>) {
        let (n, na) = (self.num_states, self.num_actions);
        let mut actions = vec![0usize; n];
        loop {
            let v = self.evaluate(reward, &deterministic(&actions, na));
            let mut changed = false;
            for s in 0..n {
                let q =
                    |a: usize| reward[s * na + a] + self.gamma * (0..n).map(|s2| self.p(s, a, s2) * v[s2]).sum::<f64>();
                let current = q(actions[s]);
                let (best, best_q) = (0..na).map(|a| (a, q(a))).fold((actions[s], current), |acc, (a, qa)| {
                    if qa > acc.1 + 1e-12 * (1.0 + acc.1.abs()) {
                        (a, qa)
                    } else {
                        acc
                    }
                });
                if best != actions[s] && best_q > current {
                    actions[s] = best;
                    changed = true;
                }
            }
            if !changed {
                return (v, actions);
            }
        }
    }
}

/// One-hot policy table.
pub fn deterministic(actions: &[usize], num_actions: usize) -> Vec<f64> {
    let mut t = vec![0.0; actions.len() * num_actions];
    for (s, a) in actions.iter().enumerate() {
        t[s * num_actions + a] = 1.0;
    }
    t
}

/// Exact minimum-norm point of `conv(points)` by enumerating supports.
/// Returns the point and convex weights. Exponential in `points.len()`.
pub fn min_norm_point(points: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = points.len();
    assert!(n > 0 && n <= 16, "support enumeration needs 1..=16 points");
    let k = points[0].len();
    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    for mask in 1u32..(1 << n) {
        let support: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let m = support.len();
        if m > k + 1 {
            continue;
        }
        // [G 1; 1' 0] [lambda; nu] = [0; 1]
        let mut a = vec![vec![0.0; m + 1]; m + 1];
        for (r, &i) in support.iter().enumerate() {
            for (c, &j) in support.iter().enumerate() {
                a[r][c] = dot(&points[i], &points[j]);
            }
            a[r][m] = 1.0;
            a[m][r] = 1.0;
        }
        let mut rhs = vec![0.0; m + 1];
        rhs[m] = 1.0;
        let Some(sol) = gauss_solve(a, rhs) else { continue };
        if sol[..m].iter().any(|l| *l < -1e-12) {
            continue;
        }
        let mut x = vec![0.0; k];
        for (l, &i) in sol[..m].iter().zip(&support) {
            x.iter_mut().zip(&points[i]).for_each(|(xi, p)| *xi += l * p);
        }
        let xx = dot(&x, &x);
        // optimality over the whole hull
        if points.iter().any(|p| dot(&x, p) < xx - 1e-10 * (1.0 + xx)) {
            continue;
        }
        if best.as_ref().is_none_or(|b| xx < b.0) {
            let mut w = vec![0.0; n];
            for (l, &i) in sol[..m].iter().zip(&support) {
                w[i] = l.max(0.0);
            }
            best = Some((xx, x, w));
        }
    }
    let (_, x, w) = best.expect("no feasible support found");
    (x, w)
}

/// Optimal margin `max_{||w|| <= 1} min_j w . d_j` and the maximiser, via the
/// exact minimum-norm point. `w` is zero when the hull contains the origin.
pub fn max_margin(deltas: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let (x, _) = min_norm_point(deltas);
    let norm = dot(&x, &x).sqrt();
    if norm < 1e-12 {
        (0.0, vec![0.0; x.len()])
    } else {
        (norm, x.iter().map(|v| v / norm).collect())
    }
}

/// Best margin over a hyperspherical grid of unit directions (and `w = 0`),
/// with `steps` subdivisions per angle. A lower bound on the optimum.
pub fn sphere_grid_margin(deltas: &[Vec<f64>], steps: usize) -> f64 {
    let k = deltas[0].len();
    let margin = |w: &[f64]| deltas.iter().map(|d| dot(d, w)).fold(f64::INFINITY, f64::min);
    if k == 1 {
        return margin(&[1.0]).max(margin(&[-1.0])).max(0.0);
    }
    let mut best = 0.0f64;
    let angles = k - 1;
    let mut w = vec![0.0; k];
    for idx in 0..steps.pow(angles as u32) {
        let mut rem = idx;
        let mut sin_prod = 1.0;
        for (i, slot) in w.iter_mut().enumerate().take(angles) {
            let j = rem % steps;
            rem /= steps;
            // the last angle spans the full circle
            let range = if i + 1 == angles {
                2.0 * std::f64::consts::PI
            } else {
                std::f64::consts::PI
            };
            let theta = range * (j as f64 + 0.5) / steps as f64;
            *slot = sin_prod * theta.cos();
            sin_prod *= theta.sin();
        }
        w[k - 1] = sin_prod;
        best = best.max(margin(&w));
    }
    best
}
