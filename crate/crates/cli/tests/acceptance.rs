//! Acceptance criteria, one pass/fail line each. Exits nonzero if any fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use apprentice_cli::config::{load, RunConfig};
use apprentice_core::apprentice::{mix_policies, run_apprenticeship, ApprenticeConfig, Mode, Problem};
use apprentice_core::diagnostics::theorem1_iterations;
use apprentice_core::environments::{make_gridworld, make_random_mdp, random_weights, GridworldSpec};
use apprentice_core::features::{exact_feature_expectation, mc_feature_expectation, truncation_horizon};
use apprentice_core::margin::solve_max_margin;
use apprentice_core::mdp::linear_reward;
use apprentice_core::quantum_cost::{classical_iteration_cost, quantum_iteration_cost, CostParams};
use apprentice_core::rl::solve_eps_optimal;
use apprentice_core::rng::seeded;
use apprentice_core::{Mdp, Policy, RewardTable, SimRng};
use apprentice_oracles::{max_margin, min_norm_point, sphere_grid_margin};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn random_policy(mdp: &Mdp, rng: &mut SimRng) -> Policy {
    let a = mdp.num_actions();
    let mut probs = Vec::new();
    for _ in 0..mdp.num_states() {
        let raw: Vec<f64> = (0..a).map(|_| rng.random::<f64>() + 1e-3).collect();
        let total: f64 = raw.iter().sum();
        probs.extend(raw.iter().map(|x| x / total));
    }
    Policy::stochastic(a, probs).unwrap()
}

fn margin_instance(seed: u64) -> Vec<Vec<f64>> {
    let mut rng = seeded(seed);
    let n = rng.random_range(1..=6);
    let k = rng.random_range(1..=4);
    let shift: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
    (0..n)
        .map(|_| (0..k).map(|i| shift[i] + rng.random_range(-1.0..1.0)).collect())
        .collect()
}

const MARGIN_EPS: f64 = 0.01;
const GRID_STEPS: usize = 120;

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut grid_ok = true;
    for seed in 0..100 {
        let d = margin_instance(seed);
        let k = d[0].len();
        let (t_qp, _) = max_margin(&d);
        // grid cells are at most (k-1) pi / steps from any direction
        let scale = d.iter().map(|r| norm(r)).fold(0.0, f64::max);
        let resolution = scale * (k.saturating_sub(1)) as f64 * std::f64::consts::PI / GRID_STEPS as f64;
        let t_grid = sphere_grid_margin(&d, GRID_STEPS);
        grid_ok &= t_grid <= t_qp + 1e-9 && t_grid >= t_qp - resolution - 1e-9;
        let m = solve_max_margin(&d, MARGIN_EPS).unwrap();
        worst = worst.max((m.t - t_qp).abs());
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= MARGIN_EPS && grid_ok && elapsed < Duration::from_secs(60),
        format!(
            "max |t - t_oracle| = {worst:.3e} (tol {MARGIN_EPS}), sphere grid consistent: {grid_ok}, {:.2} s (limit 60 s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_2() -> Outcome {
    let (mut checked, mut held) = (0, 0);
    let mut worst_slack = f64::INFINITY;
    for seed in 0..100 {
        let d = margin_instance(seed);
        let (t_star, w_star) = max_margin(&d);
        if t_star < MARGIN_EPS {
            continue;
        }
        let m = solve_max_margin(&d, MARGIN_EPS).unwrap();
        let gap = common::dist(&m.w, &w_star);
        let bound = (2.0 * MARGIN_EPS / t_star).sqrt();
        checked += 1;
        if gap <= bound {
            held += 1;
        }
        worst_slack = worst_slack.min(bound - gap);
    }
    outcome(
        checked > 0 && held == checked,
        format!("{held}/{checked} instances with t* >= eps satisfy ||w - w*|| <= sqrt(2 eps / t*), min slack {worst_slack:.3e}"),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = seeded(303);
    let mut worst_excess = f64::NEG_INFINITY;
    let mut tail_ok = true;
    let mut lib_ok = true;
    for trial in 0..20u64 {
        let s = rng.random_range(2..15);
        let a = rng.random_range(1..5);
        let k = rng.random_range(1..6);
        let gamma = rng.random_range(0.05..0.97);
        let eps = rng.random_range(0.01..0.9);
        let (mdp, features) = make_random_mdp(s, a, k, s.min(4), gamma, 1000 + trial).unwrap();
        let policy = random_policy(&mdp, &mut rng);
        let h = truncation_horizon(eps, gamma).unwrap();
        let tail = gamma.powi(h as i32 + 1) / (1.0 - gamma);
        tail_ok &= tail <= eps / 2.0;

        let model = common::model(&mdp);
        let phi = common::feature_table(&features);
        let table = common::policy_table(&policy, s, a);
        let mu_exact = model.feature_expectation(&phi, k, &table);
        let mu_h = model.finite_horizon_feature_expectation(&phi, k, &table, h);
        worst_excess = worst_excess.max(common::dist(&mu_exact, &mu_h) - tail);

        let lib = exact_feature_expectation(&mdp, &features, &policy).unwrap().vec;
        lib_ok &= common::dist(&lib, &mu_exact) <= 1e-8;
    }
    outcome(
        tail_ok && worst_excess <= 1e-8 && lib_ok,
        format!(
            "tail bound <= eps/2 in all 20: {tail_ok}, max(||mu - mu_H|| - tail) = {worst_excess:.3e} (tol 1e-8), library exact mu matches: {lib_ok}"
        ),
    )
}

fn criterion_4() -> Outcome {
    let (eps, delta) = (0.1, 0.05);
    let start = Instant::now();
    let mut hits = 0;
    let mut worst = 0.0f64;
    for trial in 0..200u64 {
        let mut rng = seeded(4000 + trial);
        let s = rng.random_range(3..10);
        let a = rng.random_range(2..4);
        let (mdp, features) = make_random_mdp(s, a, 4, s.min(3), 0.7, 4000 + trial).unwrap();
        let policy = random_policy(&mdp, &mut rng);
        let est = mc_feature_expectation(&mdp, &features, &policy, eps, delta, &mut rng).unwrap();
        let exact = common::oracle_mu(&mdp, &features, &policy);
        let err = common::dist(&est.vec, &exact);
        worst = worst.max(err);
        if err <= eps {
            hits += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        hits >= 190 && elapsed < Duration::from_secs(300),
        format!(
            "{hits}/200 estimates within eps = {eps} (need >= 190), worst error {worst:.4}, {:.1} s (limit 300 s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = seeded(505);
    let mut worst = f64::NEG_INFINITY;
    let mut failures = 0;
    for trial in 0..50u64 {
        let s = rng.random_range(1..20);
        let a = rng.random_range(1..6);
        let gamma = [0.0, 0.5, 0.8, 0.9, 0.95][trial as usize % 5];
        let eps_rl = [0.5, 0.1, 0.01, 1e-3, 1e-6][(trial as usize / 5) % 5];
        let (mdp, _) = make_random_mdp(s, a, 1, s.min(5), gamma, 5000 + trial).unwrap();
        let values: Vec<f64> = (0..s * a).map(|_| rng.random_range(-1.0..1.0)).collect();
        let reward = RewardTable::new(s, a, values.clone()).unwrap();
        let policy = solve_eps_optimal(&mdp, &reward, eps_rl).unwrap();
        let model = common::model(&mdp);
        let (v_star, _) = model.policy_iteration(&values);
        let v_pi = model.evaluate(&values, &common::policy_table(&policy, s, a));
        let gap = v_star
            .iter()
            .zip(&v_pi)
            .map(|(x, y)| x - y)
            .fold(f64::NEG_INFINITY, f64::max);
        if gap > eps_rl + 1e-9 {
            failures += 1;
        }
        worst = worst.max(gap - eps_rl);
    }
    outcome(
        failures == 0,
        format!(
            "{}/50 instances eps_rl-optimal, max(gap - eps_rl) = {worst:.3e} (slack 1e-9)",
            50 - failures
        ),
    )
}

const IDEAL_EPS: f64 = 0.3;
const IDEAL_EPS_RL: f64 = 1e-6;

struct IdealRun {
    problem: Problem,
    result: apprentice_core::apprentice::RunResult,
}

fn ideal_runs() -> Vec<IdealRun> {
    let (mdp, features) = make_gridworld(&GridworldSpec {
        width: 4,
        height: 4,
        macrocell_size: 2,
        noise: 0.2,
        discount: 0.9,
        hidden_w: vec![0.25; 4],
    })
    .unwrap();
    (0..10u64)
        .map(|seed| {
            let mut rng = seeded(600 + seed);
            let comps: Vec<Policy> = (0..2)
                .map(|_| {
                    let w = random_weights(4, 1.0, &mut rng);
                    solve_eps_optimal(&mdp, &linear_reward(&features, &w).unwrap(), IDEAL_EPS_RL).unwrap()
                })
                .collect();
            let p: f64 = rng.random_range(0.1..0.9);
            let expert = mix_policies(&comps, &[p, 1.0 - p]).unwrap();
            let problem = Problem {
                mdp: mdp.clone(),
                features: features.clone(),
                expert_policy: Some(expert),
                demos: None,
            };
            let mut config = ApprenticeConfig::new(Mode::Ideal, IDEAL_EPS, IDEAL_EPS_RL, 0.1);
            config.max_iterations = 100_000;
            config.seed = seed;
            let result = run_apprenticeship(&config, &problem).unwrap_or_else(|e| panic!("ideal run {seed}: {e}"));
            IdealRun { problem, result }
        })
        .collect()
}

fn criterion_6(runs: &[IdealRun]) -> Outcome {
    let mut checked = 0;
    let mut violations = 0;
    let mut closest = f64::INFINITY;
    let mut max_disagreement = 0.0f64;
    for run in runs {
        let r = &run.result;
        let p = &run.problem;
        let k = p.features.dim();
        let gamma = p.mdp.discount();
        let mu_e = common::oracle_mu(&p.mdp, &p.features, p.expert_policy.as_ref().unwrap());
        for i in 1..r.policies.len() {
            // hull of the first i policies, then the policy added at step i
            let (x, _) = min_norm_point(&r.history.deltas()[..i]);
            let dist = norm(&x);
            if dist < IDEAL_EPS {
                continue;
            }
            let mu_bar: Vec<f64> = mu_e.iter().zip(&x).map(|(e, v)| e - v).collect();
            let mu_new = common::oracle_mu(&p.mdp, &p.features, &r.policies[i]);
            let dir: Vec<f64> = mu_new.iter().zip(&mu_bar).map(|(a, b)| a - b).collect();
            let lambda = (dot(&x, &dir) - IDEAL_EPS_RL) / dot(&dir, &dir);
            let mu_tilde: Vec<f64> = mu_bar.iter().zip(&dir).map(|(b, d)| b + lambda * d).collect();
            let ratio = common::dist(&mu_e, &mu_tilde) / dist;
            let h = 1.0 - gamma;
            let kf = k as f64;
            let bound =
                (kf.sqrt() + h * (IDEAL_EPS_RL / 2.0).sqrt()) / (kf + h * h * (dist * dist - IDEAL_EPS_RL)).sqrt();
            checked += 1;
            if ratio > bound + 1e-9 {
                violations += 1;
            }
            closest = closest.min(bound - ratio);
            if let Some(d) = &r.records[i - 1].diagnostic {
                max_disagreement = max_disagreement.max((d.ratio_observed - ratio).abs());
            }
        }
    }
    outcome(
        checked > 0 && violations == 0,
        format!(
            "{}/{checked} iterations with dist >= eps within the contraction bound, min(bound - ratio) = {closest:.4}, library vs oracle ratio differ by <= {max_disagreement:.1e}",
            checked - violations
        ),
    )
}

fn criterion_7(runs: &[IdealRun]) -> Outcome {
    let bound = theorem1_iterations(4, 0.9, IDEAL_EPS, IDEAL_EPS_RL).unwrap();
    let cap = bound.ceil();
    let longest = runs.iter().map(|r| r.result.iterations).max().unwrap_or(0);
    let within = runs.iter().filter(|r| r.result.iterations <= cap).count();
    let reference = theorem1_iterations(4, 0.9, 0.3, 0.0).unwrap();
    let rel = (reference.iterations / 3.73e4 - 1.0).abs();
    outcome(
        within == runs.len() && rel <= 0.01,
        format!(
            "{within}/{} runs stop within ceil(bound) = {cap} (longest {longest}), bound at (4, 0.9, 0.3, 0) = {:.1} ({:.3}% from 3.73e4, tol 1%)",
            runs.len(),
            reference.iterations,
            rel * 100.0
        ),
    )
}

fn criterion_8() -> Outcome {
    let path = configs().join("gridworld4x4.json");
    let config: RunConfig = load(&path).unwrap();
    let eps = config.learner.epsilon;
    let mut good = 0;
    let mut slowest = Duration::ZERO;
    let mut dists = Vec::new();
    let mut true_dists = Vec::new();
    for seed in 0..10u64 {
        let start = Instant::now();
        let learner = config.learner.to_core(seed).unwrap();
        let problem = config.problem(&configs(), seed).unwrap();
        let result = run_apprenticeship(&learner, &problem);
        let elapsed = start.elapsed();
        slowest = slowest.max(elapsed);
        let Ok(r) = result else {
            dists.push(f64::NAN);
            continue;
        };
        dists.push(r.dist_min);
        let mu_e = common::oracle_mu(&problem.mdp, &problem.features, problem.expert_policy.as_ref().unwrap());
        let mu_best = common::oracle_mu(&problem.mdp, &problem.features, &r.policies[r.i_min]);
        true_dists.push(common::dist(&mu_e, &mu_best));
        if r.dist_min <= 2.0 * eps && elapsed < Duration::from_secs(120) {
            good += 1;
        }
    }
    let fmt = |v: &[f64]| v.iter().map(|d| format!("{d:.3}")).collect::<Vec<_>>().join(" ");
    outcome(
        good >= 9,
        format!(
            "{good}/10 runs end with dist_min <= 2 eps = {} in < 120 s (slowest {:.1} s); dist_min [{}]; exact distance of the selected policy [{}]",
            2.0 * eps,
            slowest.as_secs_f64(),
            fmt(&dists),
            fmt(&true_dists)
        ),
    )
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}

fn criterion_9() -> Outcome {
    let p = CostParams {
        k: 100,
        num_states: 50,
        num_actions: 10,
        gamma: 0.9,
        epsilon: 0.3,
        epsilon_rl: 0.01,
        delta: 0.1,
        n: None,
    };
    let classical = classical_iteration_cost(&p).unwrap();
    let quantum = quantum_iteration_cost(&p).unwrap();
    let gap: f64 = 0.3 * 0.3 - 0.01;
    let direct_c = (100.0 + 500.0) / (0.1f64.powi(7) * 0.3f64.powi(6) * gap);
    let direct_q = (10.0 + 50.0 * 10f64.sqrt()) / (0.1f64.powi(16) * 0.3f64.powi(24) * gap.sqrt());
    let rel_c = (classical / direct_c - 1.0).abs();
    let rel_q = (quantum / direct_q - 1.0).abs();
    // the quoted values carry three significant figures
    let quoted = (classical / 1.03e14 - 1.0).abs() < 5e-3 && (quantum / 2.10e31 - 1.0).abs() < 5e-3;

    let ks: Vec<usize> = (0..9)
        .map(|i| 10usize.pow(6 + i / 2) * if i % 2 == 1 { 3 } else { 1 })
        .collect();
    let base = CostParams {
        num_states: 1,
        num_actions: 1,
        ..p
    };
    let lk: Vec<f64> = ks.iter().map(|k| (*k as f64).ln()).collect();
    let lc: Vec<f64> = ks
        .iter()
        .map(|&k| {
            classical_iteration_cost(&CostParams { k, ..base.clone() })
                .unwrap()
                .ln()
        })
        .collect();
    let lq: Vec<f64> = ks
        .iter()
        .map(|&k| quantum_iteration_cost(&CostParams { k, ..base.clone() }).unwrap().ln())
        .collect();
    let (sc, sq) = (slope(&lk, &lc), slope(&lk, &lq));
    outcome(
        rel_c <= 1e-9 && rel_q <= 1e-9 && quoted && (sc - 1.0).abs() <= 0.02 && (sq - 0.5).abs() <= 0.02,
        format!(
            "classical {classical:.6e} (rel err {rel_c:.1e}), quantum {quantum:.6e} (rel err {rel_q:.1e}), 3 s.f. match: {quoted}, slopes {sc:.4} / {sq:.4}"
        ),
    )
}

fn criterion_10() -> Outcome {
    let config = configs().join("gridworld4x4.json");
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let code = apprentice_cli::execute([
            "apprentice",
            "run",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        (code, std::fs::read(out.join("iterations.csv")).unwrap_or_default())
    };
    let (code_a, a) = run("a");
    let (code_b, b) = run("b");
    outcome(
        code_a == 0 && code_b == 0 && !a.is_empty() && a == b,
        format!(
            "exit codes {code_a}/{code_b}, iterations.csv {} and {} bytes, identical: {}",
            a.len(),
            b.len(),
            a == b
        ),
    )
}

fn main() {
    let mut all = true;
    let mut report = |n: usize, name: &str, f: &dyn Fn() -> Outcome| {
        let start = Instant::now();
        let o = f();
        all &= o.pass;
        println!(
            "criterion {n:>2} [{name}]: {} ({}; {:.1} s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    };
    report(1, "margin solver vs exact oracle", &criterion_1);
    report(2, "w-closeness", &criterion_2);
    report(3, "truncation tail", &criterion_3);
    report(4, "Monte Carlo calibration", &criterion_4);
    report(5, "eps_rl-optimality", &criterion_5);
    let runs = ideal_runs();
    report(6, "per-iteration contraction", &|| criterion_6(&runs));
    report(7, "iteration bound", &|| criterion_7(&runs));
    report(8, "end-to-end gridworld", &criterion_8);
    report(9, "cost model", &criterion_9);
    report(10, "replay determinism", &criterion_10);
    if !all {
        println!("acceptance: FAILED");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
