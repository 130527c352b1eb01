use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};

use super::*;
use crate::spectral::{integrate, lp_norm};

/// Adaptive Simpson rule, independent of the Gauss panels used by the kernel.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn recurse(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, 60)
}

#[test]
fn closed_form_values_at_the_origin() {
    let gauss = kernel_value(&KernelSpec::new(2.0, 1).unwrap(), &[0.0], 1.0).unwrap();
    assert!((gauss - (4.0 * PI).powf(-0.5)).abs() < 1e-15);
    assert!((gauss - 0.282_094_8).abs() < 1e-7);
    let cauchy = kernel_value(&KernelSpec::new(1.0, 1).unwrap(), &[0.0], 1.0).unwrap();
    assert!((cauchy - 1.0 / PI).abs() < 1e-15);
}

#[test]
fn general_alpha_peak_matches_independent_quadrature() {
    // oracle: (1/π) ∫_0^∞ exp(-ξ^1.5) dξ by adaptive Simpson on [0, 40]
    let oracle = adaptive_simpson(&|xi: f64| (-xi.powf(1.5)).exp(), 0.0, 40.0, 1e-13) / PI;
    // frozen from an independent 30-digit evaluation; equals Γ(5/3)/π
    let frozen = 0.287_352_751_452_164_45;
    assert!((oracle - frozen).abs() < 1e-10);
    let spec = KernelSpec::new(1.5, 1).unwrap();
    let v = kernel_value(&spec, &[0.0], 1.0).unwrap();
    assert!((v - frozen).abs() < 1e-9 * frozen, "{v}");
    assert!((spec.peak_at_unit_time() - frozen).abs() < 1e-13);
}

#[test]
fn general_alpha_off_origin_values() {
    // frozen reference values from 30-digit oscillatory quadrature
    let cases = [
        (1.5, 1, 1.0, 0.202_038_159_607_840_13),
        (0.5, 1, 0.7, 0.124_322_251_411_167_73),
        (1.5, 2, 0.8, 0.072_838_861_856_548_97),
    ];
    for (alpha, dim, r, expected) in cases {
        let spec = KernelSpec::new(alpha, dim).unwrap();
        let mut x = vec![0.0; dim];
        x[0] = r;
        let v = kernel_value(&spec, &x, 1.0).unwrap();
        assert!((v - expected).abs() < 1e-9 * expected, "alpha={alpha} dim={dim}: {v}");
    }
}

#[test]
fn quadrature_path_reproduces_closed_forms() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(2);
    for dim in [1, 2] {
        for alpha in [1.0, 2.0] {
            let spec = KernelSpec::new(alpha, dim).unwrap();
            for _ in 0..10 {
                let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-4.0..4.0)).collect();
                let t = rng.gen_range(0.2..5.0);
                let exact = kernel_value(&spec, &x, t).unwrap();
                let quad = kernel_value_quadrature(&spec, &x, t).unwrap();
                assert!((exact - quad).abs() <= 1e-8 * exact.max(1e-300), "{alpha} {dim} {x:?} {t}: {exact} vs {quad}");
            }
        }
    }
}

#[test]
fn rejects_nonpositive_time() {
    let spec = KernelSpec::new(1.5, 1).unwrap();
    assert!(kernel_value(&spec, &[0.0], 0.0).is_err());
    assert!(kernel_value(&spec, &[0.0], -1.0).is_err());
    assert!(kernel_value(&spec, &[0.0, 0.0], 1.0).is_err());
    assert!(KernelSpec::new(2.1, 1).is_err());
    assert!(KernelSpec::new(1.0, 3).is_err());
}

#[test]
fn far_field_decays_like_the_stable_tail() {
    let spec = KernelSpec::new(1.5, 1).unwrap();
    let a = spec.tail_constant();
    for x in [20.0, 40.0] {
        let v = kernel_value(&spec, &[x], 1.0).unwrap();
        let law = a * x.powf(-2.5);
        assert!((v / law - 1.0).abs() < 0.05, "x={x}: {v} vs {law}");
    }
}

#[test]
fn gaussian_grid_kernel_matches_closed_form() {
    let grid = Grid::new(1, 512, 40.0).unwrap();
    let spec = KernelSpec::new(2.0, 1).unwrap();
    let k = kernel_grid(&spec, &grid, 1.0).unwrap();
    let exact = Field::from_fn(grid, |x| kernel_value(&spec, x, 1.0).unwrap());
    assert!(k.sub(&exact).unwrap().max_abs() <= 1e-10);
}

/// Periodic Poisson kernel: the image sum Σ_m P_1(x + mL, t) in closed form.
fn wrapped_cauchy(x: f64, t: f64, l: f64) -> f64 {
    let a = 2.0 * PI * t / l;
    let b = 2.0 * PI * x / l;
    a.sinh() / (l * (a.cosh() - b.cos()))
}

#[test]
fn cauchy_grid_kernel_matches_wrapped_images() {
    let (l, t) = (40.0, 1.0);
    let grid = Grid::new(1, 512, l).unwrap();
    let spec = KernelSpec::new(1.0, 1).unwrap();
    let k = kernel_grid(&spec, &grid, t).unwrap();
    let closed = Field::from_fn(grid.clone(), |x| wrapped_cauchy(x[0], t, l));
    assert!(k.sub(&closed).unwrap().max_abs() <= 1e-8);

    // the truncated image sum |m| <= 50 omits a tail of order 2t/(π L² 50)
    let images = Field::from_fn(grid, |x| {
        (-50..=50).map(|m| kernel_value(&spec, &[x[0] + m as f64 * l], t).unwrap()).sum()
    });
    let truncation = 2.0 * t / (PI * l * l * 49.5);
    assert!(k.sub(&images).unwrap().max_abs() <= 1.1 * truncation);
}

#[test]
fn grid_kernels_have_unit_mass_and_are_nonnegative() {
    for alpha in [0.5, 1.0, 1.5, 2.0] {
        let grid = Grid::new(1, 1 << 15, 64.0).unwrap();
        let spec = KernelSpec::new(alpha, 1).unwrap();
        let k = kernel_grid(&spec, &grid, 1.0).unwrap();
        assert!((integrate(&k) - 1.0).abs() < 1e-12, "alpha={alpha}");
        let peak = k.max_abs();
        assert!(k.min() >= -1e-12 * peak, "alpha={alpha}: min {}", k.min());
    }
    let grid = Grid::new(2, 128, 16.0).unwrap();
    let k = kernel_grid(&KernelSpec::new(1.0, 2).unwrap(), &grid, 1.0).unwrap();
    assert!((integrate(&k) - 1.0).abs() < 1e-12);
}

#[test]
fn semigroup_examples() {
    let l = 10.0;
    let grid = Grid::new(1, 64, l).unwrap();
    let f = Field::from_fn(grid.clone(), |x| (2.0 * PI * x[0] / l).cos());
    assert_eq!(heat_semigroup_apply(&f, 0.0, 1.3).unwrap(), f);
    let decayed = heat_semigroup_apply(&f, l / (2.0 * PI), 1.0).unwrap();
    assert!(decayed.sub(&f.scaled((-1.0f64).exp())).unwrap().max_abs() < 1e-14);
    assert!(heat_semigroup_apply(&f, -1.0, 1.0).is_err());
}

#[test]
fn decay_bound_examples() {
    let grid = Grid::new(1, 4096, 400.0).unwrap();
    let u0 = Field::from_fn(grid.clone(), |x| (-(x[0] - 1.0).powi(2)).exp() + 0.5 * (-(x[0] + 2.0).powi(2) / 3.0).exp());
    let spec = KernelSpec::new(1.3, 1).unwrap();
    let b = decay_bound_check(&spec, &u0, 3.0, 1.0).unwrap();
    assert_eq!(b.c_emp, 1.0);
    let l1 = lp_norm(&u0, 1.0).unwrap();
    assert!((b.lhs - l1).abs() < 1e-12 * l1);
    assert!((b.rhs - l1).abs() < 1e-12 * l1);

    // small times: lhs approaches ‖u0‖_q and never exceeds it
    let b = decay_bound_check(&spec, &u0, 1e-8, 2.0).unwrap();
    assert!(b.lhs <= b.initial_norm * (1.0 + 1e-14));
    assert!((b.lhs - b.initial_norm).abs() < 1e-6 * b.initial_norm);

    // Gaussian slope −(N/α)(1 − 1/2) = −0.25
    let spec = KernelSpec::new(2.0, 1).unwrap();
    let u0 = Field::from_fn(grid, |x| (-x[0] * x[0] / (2.0 * 0.01)).exp());
    let ts = [1.0f64, 4.0, 16.0];
    let logs: Vec<(f64, f64)> = ts
        .iter()
        .map(|&t| {
            let b = decay_bound_check(&spec, &u0, t, 2.0).unwrap();
            assert!(b.lhs <= b.rhs * (1.0 + 1e-9));
            assert!(b.lhs <= b.initial_norm);
            (t.ln(), b.lhs.ln())
        })
        .collect();
    let slope = (logs[2].1 - logs[0].1) / (logs[2].0 - logs[0].0);
    assert!((slope + 0.25).abs() < 0.02, "slope {slope}");
}

#[test]
fn c_emp_reference_values() {
    let spec = KernelSpec::new(1.0, 1).unwrap();
    // ‖P_1(·,1)‖_3 = (3/(8π²))^{1/3}
    let c3 = c_emp(&spec, 3.0).unwrap();
    assert!((c3 - 0.336_184_103_642_090_6).abs() < 1e-6, "{c3}");
    assert!((c_emp(&spec, f64::INFINITY).unwrap() - 1.0 / PI).abs() < 1e-15);
    let gauss = KernelSpec::new(2.0, 2).unwrap();
    // ‖P_2(·,1)‖_2² = 1/(8π) in two dimensions
    let c2 = c_emp(&gauss, 2.0).unwrap();
    assert!((c2 - (8.0 * PI).powf(-0.5)).abs() < 1e-10, "{c2}");
}

#[test]
fn gradient_norm_scaling() {
    // ‖∇P_α(t)‖_q ∝ t^{-N(1-1/q)/α - 1/α}
    for (alpha, l, n, ts) in [(2.0, 200.0, 4096, [1.0, 4.0, 16.0]), (1.0, 4096.0, 1 << 16, [1.0, 2.0, 4.0])] {
        let spec = KernelSpec::new(alpha, 1).unwrap();
        let grid = Grid::new(1, n, l).unwrap();
        let q = 2.0;
        let pts: Vec<(f64, f64)> = ts
            .iter()
            .map(|&t| {
                let k = kernel_grid(&spec, &grid, t).unwrap();
                let g = crate::spectral::gradient(&k).unwrap();
                (f64::ln(t), lp_norm(&g[0], q).unwrap().ln())
            })
            .collect();
        let slope = (pts[2].1 - pts[0].1) / (pts[2].0 - pts[0].0);
        let theory = -(1.0 - 1.0 / q) / alpha - 1.0 / alpha;
        assert!((slope - theory).abs() < 0.05, "alpha={alpha}: {slope} vs {theory}");
    }
}

#[test]
fn tail_budget_domain_is_conservative_for_cauchy() {
    let spec = KernelSpec::new(1.0, 1).unwrap();
    let l = domain_length_for_tail_budget(&spec, 1e4, 1e-3).unwrap();
    let a = l / 4.0;
    let exact_tail = 1.0 - 2.0 / PI * (a / 1e4).atan();
    assert!(exact_tail <= 1e-3);
    assert!(exact_tail > 0.9e-3);
    let gauss = KernelSpec::new(2.0, 1).unwrap();
    let l = domain_length_for_tail_budget(&gauss, 100.0, 1e-3).unwrap();
    assert!((tail_mass(&gauss, 100.0, l / 4.0) - 1e-3).abs() < 1e-9);
}

#[test]
fn tail_constants_match_closed_forms() {
    assert!((KernelSpec::new(1.0, 1).unwrap().tail_constant() - 1.0 / PI).abs() < 1e-14);
    assert!((KernelSpec::new(1.0, 2).unwrap().tail_constant() - 0.5 / PI).abs() < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn self_similarity(x in -6.0f64..6.0, y in -3.0f64..3.0, t in 0.05f64..20.0, two_d in any::<bool>()) {
        let (dim, point) = if two_d { (2, vec![x, y]) } else { (1, vec![x]) };
        let spec = KernelSpec::new(1.5, dim).unwrap();
        let direct = kernel_value(&spec, &point, t).unwrap();
        let scaled: Vec<f64> = point.iter().map(|v| v * t.powf(-1.0 / 1.5)).collect();
        let via_unit = t.powf(-(dim as f64) / 1.5) * kernel_value(&spec, &scaled, 1.0).unwrap();
        prop_assert!((direct - via_unit).abs() <= 1e-8 * direct.abs());
    }

    #[test]
    fn semigroup_composes(seed in any::<u64>(), s in 0.0f64..2.0, t in 0.0f64..2.0, alpha in 0.3f64..=2.0) {
        let grid = Grid::new(1, 64, 8.0).unwrap();
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let f = Field::new(grid.clone(), (0..64).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
        let twice = heat_semigroup_apply(&heat_semigroup_apply(&f, s, alpha).unwrap(), t, alpha).unwrap();
        let once = heat_semigroup_apply(&f, s + t, alpha).unwrap();
        prop_assert!(twice.sub(&once).unwrap().max_abs() <= 1e-12 * f.max_abs());
        let m0 = integrate(&f);
        prop_assert!((integrate(&once) - m0).abs() <= 1e-12 * m0);
    }
}
