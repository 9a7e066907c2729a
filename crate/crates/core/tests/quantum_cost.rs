use apprentice_core::par::Exec;
use apprentice_core::quantum_cost::*;

fn table_params() -> CostParams {
    CostParams {
        k: 100,
        num_states: 50,
        num_actions: 10,
        gamma: 0.9,
        epsilon: 0.3,
        epsilon_rl: 0.01,
        delta: 0.1,
        n: None,
    }
}

#[test]
fn costs_match_direct_evaluation() {
    let p = table_params();
    let classical = 600.0 / (0.1f64.powi(7) * 0.3f64.powi(6) * 0.08);
    let quantum = (10.0 + 50.0 * 10f64.sqrt()) / (0.1f64.powi(16) * 0.3f64.powi(24) * 0.08f64.sqrt());
    assert!((classical_iteration_cost(&p).unwrap() / classical - 1.0).abs() <= 1e-12);
    assert!((quantum_iteration_cost(&p).unwrap() / quantum - 1.0).abs() <= 1e-12);
}

fn direct(p: &CostParams) -> (f64, f64) {
    let (k, s, a) = (p.k as f64, p.num_states as f64, p.num_actions as f64);
    let h = 1.0 - p.gamma;
    let gap = p.epsilon * p.epsilon - p.epsilon_rl;
    let classical = (k + s * a) / (h.powi(7) * p.epsilon.powi(6) * gap);
    let quantum = (k.sqrt() + s * a.sqrt()) / (h.powi(16) * p.epsilon.powi(24) * gap.sqrt());
    (classical, quantum)
}

#[test]
fn every_sweep_row_matches_direct_evaluation() {
    let grid = CostGrid {
        k: vec![1, 7, 100, 40_000],
        num_states: vec![1, 50, 333],
        num_actions: vec![1, 10, 64],
        gamma: vec![0.0, 0.5, 0.9, 0.99],
        epsilon: vec![0.15, 0.3, 0.9],
        epsilon_rl: vec![0.0001, 0.02],
    };
    for r in crossover_sweep(&grid).unwrap() {
        let (c, q) = direct(&r.params);
        assert!((r.classical_cost / c - 1.0).abs() <= 1e-12, "{:?}", r.params);
        assert!((r.quantum_cost / q - 1.0).abs() <= 1e-12, "{:?}", r.params);
    }
}

#[test]
fn quantum_wins_flips_at_most_once_in_eps() {
    let eps: Vec<f64> = (1..=45).map(|i| 0.11 + 0.02 * i as f64).filter(|e| *e < 1.0).collect();
    for (k, s, a, gamma) in [
        (100_000, 10_000, 1_000, 0.5),
        (10_000_000, 100_000, 10_000, 0.3),
        (100, 50, 10, 0.9),
    ] {
        let grid = CostGrid {
            k: vec![k],
            num_states: vec![s],
            num_actions: vec![a],
            gamma: vec![gamma],
            epsilon: eps.clone(),
            epsilon_rl: vec![0.01],
        };
        let rows = crossover_sweep(&grid).unwrap();
        for pair in rows.windows(2) {
            assert!(pair[1].ratio >= pair[0].ratio);
        }
        let flips = rows
            .windows(2)
            .filter(|p| p[0].quantum_wins != p[1].quantum_wins)
            .count();
        assert!(flips <= 1);
    }
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}

#[test]
fn log_log_slopes_in_k() {
    let ks: Vec<usize> = (0..9)
        .map(|i| 10usize.pow(6 + i / 2) * if i % 2 == 1 { 3 } else { 1 })
        .collect();
    let base = CostParams {
        num_states: 1,
        num_actions: 1,
        ..table_params()
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
    assert!((slope(&lk, &lc) - 1.0).abs() <= 0.02);
    assert!((slope(&lk, &lq) - 0.5).abs() <= 0.02);
}

#[test]
fn sweep_order_and_csv() {
    let grid = CostGrid {
        k: vec![100, 1000],
        num_states: vec![50],
        num_actions: vec![10],
        gamma: vec![0.9, 0.5],
        epsilon: vec![0.3],
        epsilon_rl: vec![0.01],
    };
    let rows = crossover_sweep(&grid).unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0].params, table_params());
    assert_eq!((rows[1].params.k, rows[1].params.gamma), (100, 0.5));
    assert_eq!(rows, crossover_sweep_with(Exec::Sequential, &grid).unwrap());
    for r in &rows {
        assert_eq!(r.quantum_wins, r.quantum_cost < r.classical_cost);
        assert!((r.ratio - r.classical_cost / r.quantum_cost).abs() <= 1e-12 * r.ratio);
    }

    let mut out = Vec::new();
    write_crossover_csv(&rows, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(CROSSOVER_COLUMNS));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&first[..6], &["100", "50", "10", "0.9", "0.3", "0.01"]);
    // shortest round-trip decimals parse back exactly
    assert_eq!(first[6].parse::<f64>().unwrap(), rows[0].classical_cost);
    assert_eq!(first[7].parse::<f64>().unwrap(), rows[0].quantum_cost);
    assert_eq!(first[9], "false");
}

#[test]
fn report_has_every_subroutine() {
    let r = subroutine_costs(&table_params()).unwrap();
    let names: Vec<&str> = r.subroutines.iter().map(|s| s.name.as_str()).collect();
    assert_eq!(
        names,
        [
            "min_finding",
            "mean_estimation",
            "feature_expectation",
            "margin_solver",
            "rl_planning"
        ]
    );
    assert!((r.iterations - 100.0 / (0.01 * 0.08)).abs() < 1e-6);
    assert!(!r.header.is_empty() && !r.footer.is_empty());
    let json = serde_json::to_string(&r).unwrap();
    let back: CostReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, r);
}
