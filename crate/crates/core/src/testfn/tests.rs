use proptest::prelude::*;

use super::*;
use crate::solver::{run, SolverConfig};

#[test]
fn psi_examples() {
    assert_eq!(psi(0.5).unwrap(), 1.0);
    assert_eq!(psi(3.0).unwrap(), 0.0);
    assert!((psi(1.5).unwrap() - 0.5).abs() < 1e-15);
    assert_eq!(psi(1.0).unwrap(), 1.0);
    assert_eq!(psi(2.0).unwrap(), 0.0);
    assert!(psi(-0.1).is_err());
    assert!(psi_derivative(-0.1).is_err());
}

#[test]
fn psi_is_nonincreasing() {
    let values: Vec<f64> = (0..=10_000).map(|i| psi(3.0 * i as f64 / 10_000.0).unwrap()).collect();
    assert!(values.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn psi_derivative_matches_finite_differences() {
    let h = 1e-6;
    for i in 1..100 {
        let r = 1.0 + i as f64 / 100.0;
        let fd = (psi(r + h).unwrap() - psi(r - h).unwrap()) / (2.0 * h);
        assert!((fd - psi_derivative(r).unwrap()).abs() < 1e-6, "r={r}");
    }
}

#[test]
fn psi_is_flat_at_the_matching_points() {
    let h = 1e-3;
    let stencils: [&[f64]; 4] = [
        &[-0.5, 0.0, 0.5],
        &[1.0, -2.0, 1.0],
        &[-0.5, 1.0, 0.0, -1.0, 0.5],
        &[1.0, -4.0, 6.0, -4.0, 1.0],
    ];
    for r0 in [1.0, 2.0] {
        for (order, weights) in stencils.iter().enumerate() {
            let half = (weights.len() / 2) as f64;
            let d: f64 = weights
                .iter()
                .enumerate()
                .map(|(k, w)| w * psi(r0 + (k as f64 - half) * h).unwrap())
                .sum::<f64>()
                / h.powi(order as i32 + 1);
            assert!(d.abs() < 1e-6, "order {} at {r0}: {d}", order + 1);
        }
    }
}

#[test]
fn ell_examples() {
    assert_eq!(ell(2.0).unwrap(), 3.0);
    assert_eq!(ell(1.5).unwrap(), 4.0);
    assert!((ell(1e9).unwrap() - 2.0).abs() < 1e-8);
    assert!(ell(3.0).unwrap() < ell(2.0).unwrap());
    assert!(ell(1.0).is_err());
    assert!(TestFunctionConfig::new(1.0, 0.5, 1.0, 1.0, 1).is_err());
}

#[test]
fn young_constant_is_sharp() {
    for (eps, p) in [(0.1, 2.0), (0.5, 1.5), (1.0 / 6.0, 3.0)] {
        let c = young_constant(eps, p).unwrap();
        let b = 0.7;
        let pbar = p / (p - 1.0);
        let best = (1..20_000).map(|i| i as f64 * 1e-3).map(|a| a * b - eps * a.powf(p)).fold(f64::MIN, f64::max);
        assert!((best - c * b.powf(pbar)).abs() < 1e-6, "{eps} {p}");
    }
}

#[test]
fn composite_inequality_laplacian_case() {
    let cfg = TestFunctionConfig::new(2.0, 2.0, 1.0, 1.0, 1).unwrap();
    let grid = cfg.natural_grid(1024).unwrap();
    let check = composite_inequality_violation(&grid, &cfg).unwrap();
    assert!(check.violation <= 1e-6 * check.operator_peak, "{check:?}");

    // finite-difference oracle: the discrete Laplacian obeys the same inequality
    let phi = cfg.phi1_field(&grid);
    let h = grid.spacing();
    let v = phi.values();
    let n = v.len();
    let neg_lap = |f: &dyn Fn(f64) -> f64, i: usize| {
        (2.0 * f(v[i]) - f(v[(i + 1) % n]) - f(v[(i + n - 1) % n])) / (h * h)
    };
    let worst = (0..n)
        .map(|i| neg_lap(&|x| x.powi(3), i) - 3.0 * v[i] * v[i] * neg_lap(&|x| x, i))
        .fold(f64::MIN, f64::max);
    assert!(worst <= 1e-12 * check.operator_peak, "{worst}");
}

#[test]
fn composite_inequality_fractional_case() {
    let cfg = TestFunctionConfig::new(1.0, 2.0, 1.0, 1.0, 1).unwrap();
    let mut previous: Option<f64> = None;
    for n in [256, 512, 1024, 2048] {
        let check = composite_inequality_violation(&cfg.natural_grid(n).unwrap(), &cfg).unwrap();
        assert!(check.relative() <= 1e-4, "n={n}: {check:?}");
        if let Some(prev) = previous {
            let positive = check.relative().max(0.0);
            assert!(positive <= 0.5 * prev.max(0.0) || positive <= 1e-12);
        }
        previous = Some(check.relative());
    }
}

#[test]
fn composite_inequality_is_an_identity_at_ell_one() {
    for alpha in [0.7, 1.0, 2.0] {
        let cfg = TestFunctionConfig::new(alpha, 2.0, 1.0, 1.0, 1).unwrap();
        let check = composite_inequality_violation_at(&cfg.natural_grid(256).unwrap(), &cfg, 1.0).unwrap();
        assert_eq!(check.violation, 0.0);
    }
}

#[test]
fn composite_inequality_rejects_coarse_grids() {
    let cfg = TestFunctionConfig::new(1.0, 2.0, 1.0, 1.0, 1).unwrap();
    match composite_inequality_violation(&cfg.natural_grid(64).unwrap(), &cfg) {
        Err(Error::UnderResolved(msg)) => assert!(msg.contains("points_per_axis >= 128"), "{msg}"),
        other => panic!("expected rejection, got {other:?}"),
    }
}

#[test]
fn scaling_law_examples() {
    let r_list = [1.0, 2.5, 6.0, 15.0, 40.0];
    for (alpha, p, dim, theory) in [(1.0, 1.5, 1, -1.0), (1.0, 2.0, 1, 0.0), (2.0, 2.0, 2, 0.0)] {
        let cfg = TestFunctionConfig::new(alpha, p, 1.0, 1.0, dim).unwrap();
        let fit = scaling_law_fit(&cfg, &r_list).unwrap();
        assert!((fit.theory - theory).abs() < 1e-12);
        assert!((fit.fitted_exponent - theory).abs() < 0.1, "{fit:?}");
        assert!(fit.diagnostic.is_none());
        assert_eq!(fit.rows.len(), 5);
    }
}

#[test]
fn scaling_law_needs_a_wide_sweep() {
    let cfg = TestFunctionConfig::new(1.0, 2.0, 1.0, 1.0, 1).unwrap();
    assert!(scaling_law_fit(&cfg, &[1.0, 2.0, 3.0, 4.0, 5.0]).is_err());
    assert!(scaling_law_fit(&cfg, &[1.0, 100.0]).is_err());
}

proptest! {
    #[test]
    fn theory_exponent_sign_tracks_the_critical_exponent(alpha in 0.1f64..=2.0, p in 1.01f64..6.0, two_d in any::<bool>()) {
        let dim = if two_d { 2 } else { 1 };
        let cfg = TestFunctionConfig::new(alpha, p, 1.0, 1.0, dim).unwrap();
        let critical = critical_exponent(alpha, dim);
        let e = cfg.theory_exponent();
        if (p - critical).abs() > 1e-9 {
            prop_assert_eq!(e < 0.0, p < critical);
        }
        let at_critical = TestFunctionConfig::new(alpha, critical, 1.0, 1.0, dim).unwrap();
        prop_assert!(at_critical.theory_exponent().abs() < 1e-12);
    }
}

fn critical_run(alpha: f64, r: f64) -> (RunResult, TestFunctionConfig) {
    let p = critical_exponent(alpha, 1);
    let cfg = TestFunctionConfig::new(alpha, p, r, 1.0, 1).unwrap();
    let grid = Grid::new(1, 2048, 256.0).unwrap();
    let u0 = Field::from_fn(grid, |x| (-x[0] * x[0] / 2.0).exp());
    let mut solver = SolverConfig::new(alpha, p, -1.0);
    solver.t_end = cfg.horizon();
    solver.dt_max = 0.05;
    solver.snapshot_times = budget_snapshot_times(&cfg);
    (run(&solver, u0).unwrap(), cfg)
}

#[test]
fn critical_budget_second_term_scales_like_b_to_minus_alpha() {
    let (result, cfg) = critical_run(2.0, 2.0);
    let rows = critical_budget(&result, &cfg, 1.0 / (2.0 * cfg.ell), &[1.0, 2.0, 4.0]).unwrap();
    for w in rows.windows(2) {
        assert!((w[1].rhs_term2 / w[0].rhs_term2 - 0.25).abs() < 1e-10, "{rows:?}");
    }
    for row in &rows {
        assert!(row.lhs.is_finite() && row.rhs_term1 >= 0.0);
    }
}

#[test]
fn critical_budget_table_for_the_cauchy_case() {
    let (result, cfg) = critical_run(1.0, 4.0);
    let eps = 1.0 / (2.0 * cfg.ell);
    assert!((eps - 1.0 / 6.0).abs() < 1e-15);
    let rows = critical_budget(&result, &cfg, eps, &[1.0, 2.0, 4.0, 8.0]).unwrap();
    for w in rows.windows(2) {
        assert!((w[1].rhs_term2 / w[0].rhs_term2 - 0.5).abs() < 1e-10);
        assert!(w[1].rhs_term1 > w[0].rhs_term1);
    }
    let mass0 = crate::spectral::integrate(&result.snapshots[0].1);
    assert!(rows.iter().all(|r| r.lhs < mass0));
}

#[test]
fn critical_budget_rejects_bad_inputs() {
    let (result, cfg) = critical_run(2.0, 1.0);
    let wide = TestFunctionConfig::new(2.0, 3.0, 2.0, 1.0, 1).unwrap();
    assert!(matches!(critical_budget(&result, &wide, 0.1, &[1.0]), Err(Error::InsufficientSnapshots(_))));
    let off = TestFunctionConfig::new(2.0, 2.5, 1.0, 1.0, 1).unwrap();
    assert!(critical_budget(&result, &off, 0.1, &[1.0]).is_err());
    assert!(critical_budget(&result, &cfg, 0.1, &[100.0]).is_err());
}
