use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rustfft::num_complex::Complex64;

use super::*;

fn random_field(grid: &Grid, seed: u64) -> Field {
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let values = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Field::new(grid.clone(), values).unwrap()
}

fn harmonic(grid: &Grid) -> Field {
    let l = grid.length();
    Field::from_fn(grid.clone(), |x| (2.0 * PI * x[0] / l).cos())
}

/// Direct O(n²) DFT with the crate's normalisation, used as an independent oracle.
fn direct_dft(values: &[f64]) -> Vec<Complex64> {
    let n = values.len();
    (0..n)
        .map(|k| {
            values
                .iter()
                .enumerate()
                .map(|(j, &v)| {
                    let phase = -2.0 * PI * (k * j) as f64 / n as f64;
                    Complex64::new(v * phase.cos(), v * phase.sin())
                })
                .sum::<Complex64>()
                / n as f64
        })
        .collect()
}

#[test]
fn constant_field_has_only_the_zero_mode() {
    for dim in [1, 2] {
        let grid = Grid::new(dim, 16, 3.0).unwrap();
        let s = forward_transform(&Field::constant(grid, 2.5)).unwrap();
        assert!((s.coefficients()[0] - Complex64::new(2.5, 0.0)).norm() < 1e-15);
        assert!(s.coefficients()[1..].iter().all(|c| c.norm() < 1e-15));
    }
}

#[test]
fn zero_mode_is_mean_over_volume() {
    let grid = Grid::new(1, 64, 7.0).unwrap();
    let f = Field::from_fn(grid.clone(), |x| (-x[0] * x[0]).exp());
    let s = forward_transform(&f).unwrap();
    assert!((s.coefficients()[0].re - integrate(&f) / grid.length()).abs() < 1e-15);
}

#[test]
fn single_harmonic_has_two_symmetric_modes() {
    let grid = Grid::new(1, 32, 10.0).unwrap();
    let s = forward_transform(&harmonic(&grid)).unwrap();
    let c = s.coefficients();
    for (k, ck) in c.iter().enumerate() {
        if k == 1 || k == 31 {
            assert!((ck.norm() - 0.5).abs() < 1e-14);
        } else {
            assert!(ck.norm() < 1e-14, "mode {k}: {ck}");
        }
    }
    assert!((c[1] - c[31].conj()).norm() < 1e-15);
}

#[test]
fn transform_matches_direct_dft_at_n16() {
    let grid = Grid::new(1, 16, 1.0).unwrap();
    let f = random_field(&grid, 7);
    let oracle = direct_dft(f.values());
    let s = forward_transform(&f).unwrap();
    for (a, b) in s.coefficients().iter().zip(&oracle) {
        assert!((a - b).norm() < 1e-15);
    }
    let back = inverse_transform(&s);
    let err = back.sub(&f).unwrap().max_abs();
    assert!(err <= 1e-12 * f.max_abs());
}

#[test]
fn round_trip_in_two_dimensions() {
    let grid = Grid::new(2, 32, 2.0).unwrap();
    let f = random_field(&grid, 11);
    let back = inverse_transform(&forward_transform(&f).unwrap());
    assert!(back.sub(&f).unwrap().max_abs() <= 1e-12 * f.max_abs());
}

#[test]
fn real_fields_have_conjugate_symmetric_spectra() {
    for dim in [1, 2] {
        let grid = Grid::new(dim, 16, 1.0).unwrap();
        let s = forward_transform(&random_field(&grid, 3)).unwrap();
        for idx in 0..grid.len() {
            let m = s.mirror_index(idx);
            assert!((s.coefficients()[idx] - s.coefficients()[m].conj()).norm() < 1e-15);
        }
    }
}

#[test]
fn non_finite_input_is_rejected() {
    let grid = Grid::new(1, 8, 1.0).unwrap();
    let mut f = Field::zeros(grid);
    f.values_mut()[3] = f64::NAN;
    assert!(matches!(forward_transform(&f), Err(Error::NonFinite { index: 3, .. })));
}

#[test]
fn fractional_laplacian_of_a_harmonic() {
    let grid = Grid::new(1, 64, 10.0).unwrap();
    let f = harmonic(&grid);
    let k = 2.0 * PI / 10.0;
    for (alpha, factor) in [(2.0, k * k), (1.0, k)] {
        let lap = fractional_laplacian(&f, alpha).unwrap();
        let err = lap.sub(&f.scaled(factor)).unwrap().max_abs();
        assert!(err < 1e-13, "alpha={alpha}: {err}");
    }
    let c = fractional_laplacian(&Field::constant(grid, 4.0), 0.7).unwrap();
    assert!(c.max_abs() < 1e-14);
}

#[test]
fn fractional_laplacian_rejects_bad_alpha() {
    let f = Field::zeros(Grid::new(1, 8, 1.0).unwrap());
    assert!(fractional_laplacian(&f, 0.0).is_err());
    assert!(fractional_laplacian(&f, 2.5).is_err());
    assert!(fractional_laplacian(&f, 2.0).is_ok());
}

#[test]
fn integrate_examples() {
    let grid = Grid::new(1, 32, 10.0).unwrap();
    assert!((integrate(&Field::constant(grid.clone(), 1.0)) - 10.0).abs() < 1e-12);
    assert!(integrate(&harmonic(&grid)).abs() < 1e-12);
}

#[test]
fn lp_norm_examples() {
    let grid = Grid::new(1, 32, 10.0).unwrap();
    assert_eq!(lp_norm(&Field::constant(grid.clone(), -3.0), f64::INFINITY).unwrap(), 3.0);
    let l2 = lp_norm(&Field::constant(grid.clone(), 1.0), 2.0).unwrap();
    assert!((l2 - 10f64.sqrt()).abs() < 1e-12);
    assert!(lp_norm(&Field::zeros(grid), 0.5).is_err());

    // ∫ P_2(x,1)² dx = (8π)^{-1/2} by the Gaussian product rule
    let grid = Grid::new(1, 512, 40.0).unwrap();
    let gauss = Field::from_fn(grid, |x| (-x[0] * x[0] / 4.0).exp() / (4.0 * PI).sqrt());
    let expected = (8.0 * PI).powf(-0.25);
    assert!((lp_norm(&gauss, 2.0).unwrap() - expected).abs() < 1e-6);
}

#[test]
fn pointwise_power_examples() {
    let grid = Grid::new(1, 16, 2.0).unwrap();
    let r = pointwise_power(&Field::constant(grid.clone(), 2.0), 2.0, 0.0).unwrap();
    assert!(r.field.values().iter().all(|&v| v == 4.0));
    let r = pointwise_power(&Field::zeros(grid.clone()), 2.7, 0.0).unwrap();
    assert!(r.field.values().iter().all(|&v| v == 0.0));

    let mut f = Field::constant(grid.clone(), 1.0);
    f.values_mut()[5] = -1e-14;
    let r = pointwise_power(&f, 1.5, 1e-12).unwrap();
    assert_eq!(r.field.values()[5], 0.0);
    assert!((r.clamped_mass - grid.cell_volume() * 1e-14).abs() < 1e-28);
    assert!(!r.under_resolved);

    f.values_mut()[5] = -1e-9;
    let r = pointwise_power(&f, 1.5, 1e-12).unwrap();
    assert!(r.under_resolved);
    assert_eq!(r.min_value, -1e-9);
    assert!(pointwise_power(&f, 1.0, 0.0).is_err());
}

#[test]
fn two_thirds_rule_keeps_low_modes() {
    let grid = Grid::new(1, 12usize.next_power_of_two(), 1.0).unwrap();
    let f = random_field(&grid, 5);
    let mut s = forward_transform(&f).unwrap();
    two_thirds_truncate(&mut s);
    for (k, c) in s.coefficients().iter().enumerate() {
        let m = grid.signed_mode(k).unsigned_abs() as usize;
        if m > grid.points_per_axis() / 3 {
            assert_eq!(*c, Complex64::new(0.0, 0.0));
        } else {
            assert_ne!(*c, Complex64::new(0.0, 0.0));
        }
    }
}

#[test]
fn laplacian_agrees_with_second_difference_at_second_order() {
    let l = 2.0 * PI;
    let smooth = |x: f64| (x).sin() + 0.5 * (2.0 * x).cos() + 0.25 * (3.0 * x).sin();
    let mut errors = Vec::new();
    for n in [16, 32, 64, 128] {
        let grid = Grid::new(1, n, l).unwrap();
        let h = grid.spacing();
        let f = Field::from_fn(grid.clone(), |x| smooth(x[0]));
        let spectral = fractional_laplacian(&f, 2.0).unwrap();
        let v = f.values();
        let stencil: Vec<f64> = (0..n)
            .map(|j| -(v[(j + 1) % n] - 2.0 * v[j] + v[(j + n - 1) % n]) / (h * h))
            .collect();
        let err = spectral
            .values()
            .iter()
            .zip(&stencil)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        errors.push(err);
    }
    for pair in errors.windows(2) {
        let slope = (pair[0] / pair[1]).log2();
        assert!(slope >= 1.9, "slope {slope} from {errors:?}");
    }
}

#[test]
fn gradient_of_a_harmonic() {
    let grid = Grid::new(2, 32, 4.0).unwrap();
    let k = 2.0 * PI / 4.0;
    let f = Field::from_fn(grid.clone(), |x| (k * x[1]).sin());
    let g = gradient(&f).unwrap();
    assert!(g[0].max_abs() < 1e-13);
    let expected = Field::from_fn(grid, |x| k * (k * x[1]).cos());
    assert!(g[1].sub(&expected).unwrap().max_abs() < 1e-13);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn parseval_holds(seed in any::<u64>(), dim in 1usize..=2, length in 0.5f64..50.0) {
        let grid = Grid::new(dim, 16, length).unwrap();
        let f = random_field(&grid, seed);
        let s = forward_transform(&f).unwrap();
        let physical = grid.cell_volume() * f.values().iter().map(|v| v * v).sum::<f64>();
        let spectral = grid.volume() * s.coefficients().iter().map(|c| c.norm_sqr()).sum::<f64>();
        prop_assert!((physical - spectral).abs() <= 1e-10 * physical);
    }

    #[test]
    fn laplacian_annihilates_mass(seed in any::<u64>(), dim in 1usize..=2, alpha in 0.05f64..=2.0) {
        let grid = Grid::new(dim, 16, 3.0).unwrap();
        let f = random_field(&grid, seed);
        let l1 = lp_norm(&f, 1.0).unwrap();
        let lap = fractional_laplacian(&f, alpha).unwrap();
        prop_assert!(integrate(&lap).abs() <= 1e-12 * l1, "{} vs {}", integrate(&lap), l1);
    }

    #[test]
    fn laplacian_is_positive_semidefinite(seed in any::<u64>(), dim in 1usize..=2, alpha in 0.05f64..=2.0) {
        let grid = Grid::new(dim, 16, 3.0).unwrap();
        let f = random_field(&grid, seed);
        let lap = fractional_laplacian(&f, alpha).unwrap();
        let quad = integrate(&f.mul(&lap).unwrap());
        prop_assert!(quad >= -1e-12);
    }
}
