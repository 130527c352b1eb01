//! Gauss–Legendre panel quadrature and the Bessel function `J_0` used by the
//! radial kernel inversion.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Nodes and weights of the `m`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pm = if m == 1 { x } else { p1 };
            let pm1 = if m == 1 { 1.0 } else { p0 };
            dp = m as f64 * (x * pm - pm1) / (x * x - 1.0);
            let dx = pm / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    (nodes, weights)
}

const PANEL_ORDER: usize = 16;

fn panel_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(PANEL_ORDER))
}

/// 16-point Gauss–Legendre estimate of `∫_a^b f`.
pub fn gauss_panel(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (x, w) = panel_rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    half * x.iter().zip(w).map(|(xi, wi)| wi * f(mid + half * xi)).sum::<f64>()
}

/// Sum of [`gauss_panel`] over consecutive breakpoints.
pub fn integrate_breakpoints(f: &impl Fn(f64) -> f64, breaks: &[f64]) -> f64 {
    breaks.windows(2).map(|w| gauss_panel(f, w[0], w[1])).sum()
}

/// Bessel function of the first kind, order zero.
pub fn bessel_j0(z: f64) -> f64 {
    let z = z.abs();
    if z <= 30.0 {
        // trapezoidal rule on the periodic integral (1/π)∫_0^π cos(z sin θ) dθ
        // converges geometrically once the node count exceeds z/2
        const M: usize = 96;
        let s: f64 = (0..M)
            .map(|k| (z * (PI * (k as f64 + 0.5) / M as f64).sin()).cos())
            .sum();
        s / M as f64
    } else {
        // Hankel asymptotic expansion
        let mut p: f64 = 0.0;
        let mut q: f64 = 0.0;
        let mut a: f64 = 1.0;
        let mut zk: f64 = 1.0;
        for k in 0..60 {
            let term = a / zk;
            match k % 4 {
                0 => p += term,
                1 => q += term,
                2 => p -= term,
                _ => q -= term,
            }
            if term.abs() < 1e-18 {
                break;
            }
            let kk = (k + 1) as f64;
            a *= -(2.0 * kk - 1.0).powi(2) / (8.0 * kk);
            zk *= z;
        }
        let chi = z - 0.25 * PI;
        (2.0 / (PI * z)).sqrt() * (p * chi.cos() - q * chi.sin())
    }
}
