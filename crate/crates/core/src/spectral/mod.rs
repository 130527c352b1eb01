//! Periodic grids, sampled fields and the Fourier-space contract.
//!
//! # Transform convention
//!
//! Nodes sit at `x_j = -L/2 + j h` with `h = L / n`. The forward transform of a
//! field is the normalised discrete Fourier transform over node indices,
//!
//! ```text
//! c_k = n^{-N} Σ_j f_j exp(-2πi k·j / n),
//! ```
//!
//! and the inverse is the unnormalised sum `f_j = Σ_k c_k exp(2πi k·j / n)`.
//! With this choice the zero mode is the mean, `c_0 = L^{-N} ∫ f`, and
//! Parseval reads `h^N Σ f_j² = L^N Σ |c_k|²`. Phases are taken relative to the
//! node index, so multipliers that depend only on `|ξ|` are unaffected by the
//! shift of the origin to the centre of the box. Wavenumbers follow the standard
//! FFT ordering `ξ_k = 2π k' / L` with `k' ∈ [-n/2, n/2)`.

mod field;
mod grid;
mod transform;

pub use field::{Field, Spectrum};
pub use grid::Grid;
pub use transform::{forward_transform, inverse_transform};

use crate::error::{invalid, Error, Result};
use rustfft::num_complex::Complex64;

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 2.0 {
        Ok(())
    } else {
        Err(invalid("alpha must lie in (0,2]"))
    }
}

/// Applies a radial Fourier multiplier `m(|ξ|)` to `f`.
pub fn apply_radial_multiplier(f: &Field, multiplier: impl Fn(f64) -> f64) -> Result<Field> {
    let mut spectrum = forward_transform(f)?;
    let abs_xi = f.grid().abs_wavenumbers();
    for (c, xi) in spectrum.coefficients_mut().iter_mut().zip(abs_xi) {
        *c *= multiplier(xi);
    }
    Ok(inverse_transform(&spectrum))
}

/// `Λ^α f`, the inverse transform of `|ξ|^α f̂`. The zero mode is annihilated.
pub fn fractional_laplacian(f: &Field, alpha: f64) -> Result<Field> {
    check_alpha(alpha)?;
    apply_radial_multiplier(f, |xi| if xi == 0.0 { 0.0 } else { xi.powf(alpha) })
}

/// Spectral gradient, one field per axis. The Nyquist mode is dropped since its
/// derivative is not representable as a real field.
pub fn gradient(f: &Field) -> Result<Vec<Field>> {
    let grid = f.grid();
    let spectrum = forward_transform(f)?;
    let n = grid.points_per_axis();
    let xi = grid.wavenumbers();
    (0..grid.dim())
        .map(|axis| {
            let mut s = spectrum.clone();
            for (idx, c) in s.coefficients_mut().iter_mut().enumerate() {
                let k = grid.axis_index(idx, axis);
                *c = if k == n / 2 {
                    Complex64::new(0.0, 0.0)
                } else {
                    *c * Complex64::new(0.0, xi[k])
                };
            }
            Ok(inverse_transform(&s))
        })
        .collect()
}

/// Zeroes every mode whose signed index exceeds `n/3` in magnitude along any axis.
pub fn two_thirds_truncate(spectrum: &mut Spectrum) {
    let grid = spectrum.grid().clone();
    let n = grid.points_per_axis();
    let cutoff = n / 3;
    let keep: Vec<bool> = (0..n)
        .map(|k| {
            let signed = if k < n / 2 { k as i64 } else { k as i64 - n as i64 };
            signed.unsigned_abs() as usize <= cutoff
        })
        .collect();
    for (idx, c) in spectrum.coefficients_mut().iter_mut().enumerate() {
        let inside = (0..grid.dim()).all(|axis| keep[grid.axis_index(idx, axis)]);
        if !inside {
            *c = Complex64::new(0.0, 0.0);
        }
    }
}

/// `h^N Σ f`, exact for band-limited periodic functions.
pub fn integrate(f: &Field) -> f64 {
    f.grid().cell_volume() * f.values().iter().sum::<f64>()
}

/// Discrete `L^q` norm `(h^N Σ |f|^q)^{1/q}`; pass `f64::INFINITY` for the max norm.
pub fn lp_norm(f: &Field, q: f64) -> Result<f64> {
    if q.is_nan() || q < 1.0 {
        return Err(invalid(format!("norm exponent must be >= 1, got {q}")));
    }
    let max = f.values().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if q.is_infinite() || max == 0.0 {
        return Ok(max);
    }
    let sum: f64 = f.values().iter().map(|v| (v.abs() / max).powf(q)).sum();
    Ok(max * (f.grid().cell_volume() * sum).powf(1.0 / q))
}

/// Result of [`pointwise_power`].
#[derive(Clone, Debug)]
pub struct PowerResult {
    pub field: Field,
    /// `h^N Σ max(-f, 0)`: mass removed by clamping negative values to zero.
    pub clamped_mass: f64,
    pub min_value: f64,
    /// Set when some value lay below `-clamp_tol`.
    pub under_resolved: bool,
}

/// `max(f, 0)^p`, reporting how much negative mass was clamped away.
pub fn pointwise_power(f: &Field, p: f64, clamp_tol: f64) -> Result<PowerResult> {
    if !(p > 1.0) {
        return Err(invalid("p must exceed 1"));
    }
    if !(clamp_tol >= 0.0) {
        return Err(invalid("clamp tolerance must be nonnegative"));
    }
    f.check_finite()?;
    let integer_power = (p.fract() == 0.0 && p <= i32::MAX as f64).then_some(p as i32);
    let mut negative = 0.0;
    let mut min_value = f64::INFINITY;
    let values = f
        .values()
        .iter()
        .map(|&v| {
            min_value = min_value.min(v);
            if v < 0.0 {
                negative -= v;
                0.0
            } else if let Some(k) = integer_power {
                v.powi(k)
            } else {
                v.powf(p)
            }
        })
        .collect();
    Ok(PowerResult {
        field: Field::new(f.grid().clone(), values)?,
        clamped_mass: negative * f.grid().cell_volume(),
        min_value,
        under_resolved: min_value < -clamp_tol,
    })
}

pub(crate) fn same_grid(a: &Field, b: &Field) -> Result<()> {
    if a.grid() == b.grid() {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

#[cfg(test)]
mod tests;
