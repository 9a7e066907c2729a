//! Max-margin direction over difference vectors.
//!
//! `max_{||w|| <= 1} min_j w . d_j` is solved through its dual: the point
//! `x` of minimum norm in `conv{d_j}`. When the hull excludes the origin the
//! optimum is `w* = x / ||x||` with margin `||x||`; otherwise the margin is 0.
//!
//! The hull point is found with Frank-Wolfe using away steps and exact line
//! search. Stopping on the duality gap `||x||^2 - min_j x . d_j <= tol^2`
//! makes `w = x / ||x||` satisfy `min_j w . d_j >= ||x|| - tol^2 / ||x||`,
//! which is within `tol` of the optimum whenever `||x|| > tol`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 500_000;

#[derive(Debug, Clone, PartialEq)]
pub struct MinNormPoint {
    pub point: Vec<f64>,
    /// Convex weights over the input points.
    pub weights: Vec<f64>,
    /// Final duality gap `||x||^2 - min_j x . p_j`.
    pub gap: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginSolution {
    /// Unit direction, or the zero vector when the hull reaches the origin.
    pub w: Vec<f64>,
    /// `min_j w . d_j`.
    pub t: f64,
    /// Convex weights of the hull point over the input vectors.
    pub weights: Vec<f64>,
    pub eps_used: f64,
    pub hull_point: Vec<f64>,
    pub gap: f64,
    pub iterations: usize,
}

impl MarginSolution {
    /// True when the solver signalled that the origin is (nearly) in the hull.
    pub fn is_inseparable(&self) -> bool {
        self.w.iter().all(|x| *x == 0.0)
    }
}

fn validate_points(points: &[Vec<f64>]) -> Result<usize> {
    let first = points
        .first()
        .ok_or_else(|| Error::invalid("need at least one point"))?;
    let k = first.len();
    if k == 0 {
        return Err(Error::invalid("points must have positive dimension"));
    }
    for p in points {
        if p.len() != k {
            return Err(Error::Dimension {
                what: "hull point",
                expected: k,
                got: p.len(),
            });
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("hull points must be finite"));
        }
    }
    Ok(k)
}

fn combine(points: &[Vec<f64>], weights: &[f64], k: usize) -> Vec<f64> {
    let mut x = vec![0.0; k];
    for (p, l) in points.iter().zip(weights) {
        if *l != 0.0 {
            x.iter_mut().zip(p).for_each(|(xi, pi)| *xi += l * pi);
        }
    }
    x
}

/// Minimum-norm point of `conv(points)` to duality gap `tol^2`.
pub fn min_norm_point(points: &[Vec<f64>], tol: f64) -> Result<MinNormPoint> {
    let k = validate_points(points)?;
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tolerance {tol} must be positive")));
    }
    let n = points.len();
    let target_gap = tol * tol;

    let start = (0..n)
        .min_by(|&a, &b| crate::dot(&points[a], &points[a]).total_cmp(&crate::dot(&points[b], &points[b])))
        .unwrap_or(0);
    let mut weights = vec![0.0; n];
    weights[start] = 1.0;
    let mut x = points[start].clone();
    let mut dots = vec![0.0; n];
    let mut gap = f64::INFINITY;

    for iter in 0..MAX_ITERATIONS {
        if iter % 64 == 63 {
            x = combine(points, &weights, k);
        }
        let xx = crate::dot(&x, &x);
        for (d, p) in dots.iter_mut().zip(points) {
            *d = crate::dot(&x, p);
        }
        // lowest index wins ties
        let fw = (0..n).fold(0, |best, j| if dots[j] < dots[best] { j } else { best });
        gap = xx - dots[fw];
        if gap <= target_gap {
            return Ok(MinNormPoint {
                point: x,
                weights,
                gap: gap.max(0.0),
                iterations: iter,
            });
        }
        let away = (0..n)
            .filter(|&j| weights[j] > 0.0)
            .fold(None, |best: Option<usize>, j| match best {
                Some(b) if dots[b] >= dots[j] => Some(b),
                _ => Some(j),
            })
            .unwrap_or(fw);
        let away_gain = dots[away] - xx;

        if gap >= away_gain || weights[away] >= 1.0 {
            // toward vertex `fw`
            let d: Vec<f64> = points[fw].iter().zip(&x).map(|(p, xi)| p - xi).collect();
            let dd = crate::dot(&d, &d);
            if dd == 0.0 {
                break;
            }
            let step = (gap / dd).clamp(0.0, 1.0);
            weights.iter_mut().for_each(|l| *l *= 1.0 - step);
            weights[fw] += step;
            x.iter_mut().zip(&d).for_each(|(xi, di)| *xi += step * di);
        } else {
            // away from vertex `away`
            let d: Vec<f64> = x.iter().zip(&points[away]).map(|(xi, p)| xi - p).collect();
            let dd = crate::dot(&d, &d);
            if dd == 0.0 {
                break;
            }
            let max_step = weights[away] / (1.0 - weights[away]);
            let step = (away_gain / dd).clamp(0.0, max_step);
            weights.iter_mut().for_each(|l| *l *= 1.0 + step);
            if step >= max_step {
                weights[away] = 0.0;
            } else {
                weights[away] -= step;
            }
            x.iter_mut().zip(&d).for_each(|(xi, di)| *xi += step * di);
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|l| *l = (*l / total).max(0.0));
    }

    Err(Error::NotConverged {
        iterations: MAX_ITERATIONS,
        gap,
        point: combine(points, &weights, k),
        weights,
    })
}

/// Direction `w` with `d_j . w >= t* - eps` for every `j`, where `t*` is the
/// optimal margin. Returns `w = 0, t = 0` when the hull comes within `eps/2`
/// of the origin.
pub fn solve_max_margin(deltas: &[Vec<f64>], eps: f64) -> Result<MarginSolution> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid(format!("margin eps {eps} is not in (0, 1)")));
    }
    let tol = eps / 2.0;
    let mnp = min_norm_point(deltas, tol)?;
    let norm = crate::norm2(&mnp.point);
    let (w, t) = if norm > tol {
        let w: Vec<f64> = mnp.point.iter().map(|x| x / norm).collect();
        let t = deltas.iter().map(|d| crate::dot(d, &w)).fold(f64::INFINITY, f64::min);
        (w, t)
    } else {
        (vec![0.0; mnp.point.len()], 0.0)
    };
    Ok(MarginSolution {
        w,
        t,
        weights: mnp.weights,
        eps_used: eps,
        hull_point: mnp.point,
        gap: mnp.gap,
        iterations: mnp.iterations,
    })
}
