//! Rescaled test functions `φ_1(x) = ψ(|x|/(BR))`, `φ_2(t) = ψ(t/R^α)` and the
//! integrals built from them: the composite fractional inequality, the
//! `R`-scaling of the test-function bound and the critical-case `B` budget.

use crate::asymptotics::critical_exponent;
use crate::error::{invalid, Error, Result};
use crate::solver::RunResult;
use crate::spectral::{check_alpha, fractional_laplacian, integrate, pointwise_power, Field, Grid};

/// Number of midpoint panels used for every time integral on `[0, 2R^α]`.
pub const TIME_PANELS: usize = 256;

/// Minimum number of grid points across the transition annulus of `φ_1`.
pub const MIN_TRANSITION_POINTS: f64 = 16.0;

fn g(s: f64) -> f64 {
    if s > 0.0 {
        (-1.0 / s).exp()
    } else {
        0.0
    }
}

/// Smooth nonincreasing cutoff: 1 on `[0, 1]`, 0 on `[2, ∞)`.
pub fn psi(r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(invalid(format!("psi needs r >= 0, got {r}")));
    }
    Ok(psi_unchecked(r))
}

fn psi_unchecked(r: f64) -> f64 {
    if r <= 1.0 {
        1.0
    } else if r >= 2.0 {
        0.0
    } else {
        let a = g(2.0 - r);
        let b = g(r - 1.0);
        a / (a + b)
    }
}

/// `ψ'(r)`, exact.
pub fn psi_derivative(r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(invalid(format!("psi needs r >= 0, got {r}")));
    }
    if r <= 1.0 || r >= 2.0 {
        return Ok(0.0);
    }
    let a = g(2.0 - r);
    let b = g(r - 1.0);
    let s = a + b;
    Ok(-a * b * ((2.0 - r).powi(-2) + (r - 1.0).powi(-2)) / (s * s))
}

/// `ℓ = (2p - 1)/(p - 1)`.
pub fn ell(p: f64) -> Result<f64> {
    if !(p > 1.0) {
        return Err(invalid("p must exceed 1"));
    }
    Ok((2.0 * p - 1.0) / (p - 1.0))
}

/// Sharp constant of `ab ≤ ε a^p + C(ε) b^{p/(p-1)}`.
pub fn young_constant(eps: f64, p: f64) -> Result<f64> {
    if !(eps > 0.0) || !(p > 1.0) {
        return Err(invalid("young_constant needs eps > 0 and p > 1"));
    }
    Ok((p - 1.0) * p.powf(-p / (p - 1.0)) * eps.powf(-1.0 / (p - 1.0)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TestFunctionConfig {
    pub alpha: f64,
    pub p: f64,
    pub ell: f64,
    pub r: f64,
    pub b: f64,
    pub dim: usize,
}

impl TestFunctionConfig {
    pub fn new(alpha: f64, p: f64, r: f64, b: f64, dim: usize) -> Result<Self> {
        check_alpha(alpha)?;
        if !(r > 0.0 && b > 0.0) {
            return Err(invalid("R and B must be positive"));
        }
        if !(dim == 1 || dim == 2) {
            return Err(invalid("dimension must be 1 or 2"));
        }
        Ok(TestFunctionConfig { alpha, p, ell: ell(p)?, r, b, dim })
    }

    pub fn with_r(&self, r: f64) -> Result<Self> {
        Self::new(self.alpha, self.p, r, self.b, self.dim)
    }

    pub fn with_b(&self, b: f64) -> Result<Self> {
        Self::new(self.alpha, self.p, self.r, b, self.dim)
    }

    /// `N + α - α(ℓ - 1)`.
    pub fn theory_exponent(&self) -> f64 {
        self.dim as f64 + self.alpha - self.alpha * (self.ell - 1.0)
    }

    /// Spatial radius `BR` of the plateau of `φ_1`.
    pub fn radius(&self) -> f64 {
        self.b * self.r
    }

    /// `2R^α`, the end of the support of `φ_2`.
    pub fn horizon(&self) -> f64 {
        2.0 * self.r.powf(self.alpha)
    }

    pub fn phi1(&self, x: &[f64]) -> f64 {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        psi_unchecked(norm / self.radius())
    }

    pub fn phi2(&self, t: f64) -> f64 {
        psi_unchecked(t.max(0.0) / self.r.powf(self.alpha))
    }

    pub fn phi2_dt(&self, t: f64) -> f64 {
        let scale = self.r.powf(self.alpha);
        psi_derivative(t.max(0.0) / scale).unwrap_or(0.0) / scale
    }

    /// A grid of side `8BR` centred on the support of `φ_1`.
    pub fn natural_grid(&self, points_per_axis: usize) -> Result<Grid> {
        Grid::new(self.dim, points_per_axis, 8.0 * self.radius())
    }

    pub fn phi1_field(&self, grid: &Grid) -> Field {
        Field::from_fn(grid.clone(), |x| self.phi1(x))
    }

    /// Midpoints of the time panels on `[0, 2R^α]` and the panel width.
    pub fn time_midpoints(&self) -> (Vec<f64>, f64) {
        let dt = self.horizon() / TIME_PANELS as f64;
        ((0..TIME_PANELS).map(|k| (k as f64 + 0.5) * dt).collect(), dt)
    }
}

fn check_resolution(grid: &Grid, cfg: &TestFunctionConfig) -> Result<()> {
    if grid.dim() != cfg.dim {
        return Err(invalid("grid and test-function dimensions differ"));
    }
    let across = cfg.radius() / grid.spacing();
    if across < MIN_TRANSITION_POINTS {
        let needed = (MIN_TRANSITION_POINTS * grid.length() / cfg.radius()).ceil();
        return Err(Error::UnderResolved(format!(
            "{across:.1} points across the transition of phi_1; need at least {MIN_TRANSITION_POINTS} \
             (points_per_axis >= {needed})"
        )));
    }
    if 2.0 * cfg.radius() > 0.5 * grid.length() {
        return Err(invalid("the support of phi_1 does not fit inside the grid"));
    }
    Ok(())
}

/// Outcome of [`composite_inequality_violation`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompositeCheck {
    /// `max_x (Λ^α φ_1^ℓ - ℓ φ_1^{ℓ-1} Λ^α φ_1)`; theory says `≤ 0`.
    pub violation: f64,
    /// `max |Λ^α φ_1|`.
    pub operator_peak: f64,
    /// Roundoff level of the two spectral evaluations,
    /// `(1 + ℓ) log2(n) ε_mach |ξ|_max^α` for `max φ_1 = 1`.
    pub roundoff: f64,
}

impl CompositeCheck {
    pub fn relative(&self) -> f64 {
        self.violation / self.operator_peak
    }

    /// [`CompositeCheck::roundoff`] relative to the operator peak.
    pub fn relative_floor(&self) -> f64 {
        self.roundoff / self.operator_peak
    }
}

/// Both sides of `Λ^α φ_1^ℓ ≤ ℓ φ_1^{ℓ-1} Λ^α φ_1` at the configured `ℓ`.
pub fn composite_inequality_violation(grid: &Grid, cfg: &TestFunctionConfig) -> Result<CompositeCheck> {
    composite_inequality_violation_at(grid, cfg, cfg.ell)
}

/// As [`composite_inequality_violation`] with an explicit exponent `ℓ ≥ 1`.
pub fn composite_inequality_violation_at(grid: &Grid, cfg: &TestFunctionConfig, ell: f64) -> Result<CompositeCheck> {
    if !(ell >= 1.0) {
        return Err(invalid("the composite inequality needs ell >= 1"));
    }
    check_resolution(grid, cfg)?;
    let phi = cfg.phi1_field(grid);
    let lap = fractional_laplacian(&phi, cfg.alpha)?;
    let lhs = if ell == 1.0 { lap.clone() } else { fractional_laplacian(&phi.map(|v| v.powf(ell)), cfg.alpha)? };
    let violation = lhs
        .values()
        .iter()
        .zip(phi.values())
        .zip(lap.values())
        .map(|((l, f), d)| l - ell * f.powf(ell - 1.0) * d)
        .fold(f64::NEG_INFINITY, f64::max);
    let xi_max = grid.nyquist() * (grid.dim() as f64).sqrt();
    let log_n = (grid.len() as f64).log2();
    let roundoff = (1.0 + ell) * log_n * f64::EPSILON * xi_max.powf(cfg.alpha);
    Ok(CompositeCheck { violation, operator_peak: lap.max_abs(), roundoff })
}

/// One row of the scaling table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingRow {
    pub r: f64,
    /// `∫∫ φ_1 φ_2^ℓ |Λ^α φ_1|^{ℓ-1}`.
    pub space_term: f64,
    /// `∫∫ φ_1^ℓ φ_2 |∂_t φ_2|^{ℓ-1}`.
    pub time_term: f64,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingFit {
    pub fitted_exponent: f64,
    pub theory: f64,
    /// Largest deviation of `log total` from the fitted line.
    pub residual: f64,
    pub rows: Vec<ScalingRow>,
    pub diagnostic: Option<String>,
}

fn default_points(dim: usize) -> usize {
    if dim == 1 {
        1024
    } else {
        256
    }
}

/// Evaluates the right-hand side of the test-function bound for one `R` on
/// the grid of side `8BR` with `points_per_axis` nodes per axis.
pub fn scaling_row(cfg: &TestFunctionConfig, points_per_axis: usize) -> Result<ScalingRow> {
    let grid = cfg.natural_grid(points_per_axis)?;
    check_resolution(&grid, cfg)?;
    let ell = cfg.ell;
    let phi = cfg.phi1_field(&grid);
    let lap = fractional_laplacian(&phi, cfg.alpha)?;
    let h = grid.cell_volume();
    let space_x: f64 = h * phi.values().iter().zip(lap.values()).map(|(f, d)| f * d.abs().powf(ell - 1.0)).sum::<f64>();
    let time_x: f64 = h * phi.values().iter().map(|f| f.powf(ell)).sum::<f64>();
    let (times, dt) = cfg.time_midpoints();
    let space_t: f64 = dt * times.iter().map(|&t| cfg.phi2(t).powf(ell)).sum::<f64>();
    let time_t: f64 = dt * times.iter().map(|&t| cfg.phi2(t) * cfg.phi2_dt(t).abs().powf(ell - 1.0)).sum::<f64>();
    let space_term = space_x * space_t;
    let time_term = time_x * time_t;
    Ok(ScalingRow { r: cfg.r, space_term, time_term, total: space_term + time_term })
}

/// Fits the log-log slope of [`scaling_row`] totals against `R`.
pub fn scaling_law_fit(cfg: &TestFunctionConfig, r_list: &[f64]) -> Result<ScalingFit> {
    scaling_law_fit_with(cfg, r_list, default_points(cfg.dim))
}

pub fn scaling_law_fit_with(cfg: &TestFunctionConfig, r_list: &[f64], points_per_axis: usize) -> Result<ScalingFit> {
    if r_list.len() < 5 {
        return Err(invalid("the scaling fit needs at least five values of R"));
    }
    let (lo, hi) = r_list.iter().fold((f64::INFINITY, 0.0_f64), |(a, b), &r| (a.min(r), b.max(r)));
    if !(lo > 0.0) || (hi / lo).log10() < 1.5 {
        return Err(invalid("R values must be positive and span at least 1.5 decades"));
    }
    let rows = r_list
        .iter()
        .map(|&r| scaling_row(&cfg.with_r(r)?, points_per_axis))
        .collect::<Result<Vec<_>>>()?;
    let pts: Vec<(f64, f64)> = rows.iter().map(|row| (row.r.ln(), row.total.ln())).collect();
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let (sxy, sxx) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (y - my), b + (x - mx) * (x - mx)));
    let slope = sxy / sxx;
    let residual = pts.iter().map(|(x, y)| (y - my - slope * (x - mx)).abs()).fold(0.0, f64::max);
    let diagnostic = (residual > 1e-3).then(|| format!("log-log fit residual {residual:.3e} exceeds 1e-3"));
    Ok(ScalingFit { fitted_exponent: slope, theory: cfg.theory_exponent(), residual, rows, diagnostic })
}

/// Snapshot times needed by [`critical_budget`]: `0` and the time midpoints.
pub fn budget_snapshot_times(cfg: &TestFunctionConfig) -> Vec<f64> {
    std::iter::once(0.0).chain(cfg.time_midpoints().0).collect()
}

/// One row of the critical-case budget.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BudgetRow {
    pub b: f64,
    /// `∫ u_0 φ(·,0) - ∫∫ u^p φ - εℓ ∫∫_{Ω_1} u^p`.
    pub lhs: f64,
    /// `ℓ (∫_{Ω_3}∫_{Ω_1} u^p)^{1/p} (∫∫ φ_1^{ℓp̄} φ_2^{(ℓ-1)p̄} |∂_t φ_2|^{p̄})^{1/p̄}`.
    pub rhs_term1: f64,
    /// `ℓ C(ε) ∫∫ φ_2^{ℓp̄} φ_1^{(ℓ-1)p̄} |Λ^α φ_1|^{p̄}`.
    pub rhs_term2: f64,
}

/// Evaluates both sides of the critical-case inequality for every `B`.
///
/// Solution integrals are taken on the run's grid from its snapshots, which
/// must include `t = 0` and every time of [`budget_snapshot_times`]. Integrals
/// of the test functions alone are taken on a grid of side `8BR`.
pub fn critical_budget(run: &RunResult, cfg: &TestFunctionConfig, eps: f64, b_list: &[f64]) -> Result<Vec<BudgetRow>> {
    if !(eps > 0.0) {
        return Err(invalid("eps must be positive"));
    }
    let critical = critical_exponent(cfg.alpha, cfg.dim);
    if (cfg.p - critical).abs() > 1e-12 {
        return Err(invalid(format!("the budget needs p = {critical} (critical), got {}", cfg.p)));
    }
    let (times, dt) = cfg.time_midpoints();
    let find = |t: f64| {
        run.snapshots
            .iter()
            .find(|(s, _)| (s - t).abs() <= 1e-9 * cfg.horizon())
            .map(|(_, f)| f)
            .ok_or_else(|| Error::InsufficientSnapshots(format!("no snapshot at t = {t}")))
    };
    let u0 = find(0.0)?;
    let grid = u0.grid().clone();
    if grid.dim() != cfg.dim {
        return Err(invalid("run and test-function dimensions differ"));
    }
    let powers = times
        .iter()
        .map(|&t| Ok(pointwise_power(find(t)?, cfg.p, f64::INFINITY)?.field))
        .collect::<Result<Vec<Field>>>()?;

    let ell = cfg.ell;
    let pbar = cfg.p / (cfg.p - 1.0);
    let young = young_constant(eps, cfg.p)?;
    let points = default_points(cfg.dim);

    b_list
        .iter()
        .map(|&b| {
            let c = cfg.with_b(b)?;
            if 2.0 * c.radius() > 0.5 * grid.length() {
                return Err(invalid(format!("B = {b}: the support of phi_1 does not fit inside the run's grid")));
            }
            let phi_l = c.phi1_field(&grid).map(|v| v.powf(ell));
            let inside = c.phi1_field(&grid).map(|v| if v > 0.0 { 1.0 } else { 0.0 });
            let weighted = |f: &Field, w: &Field| integrate(&f.mul(w).expect("same grid"));

            let mut absorbed_weighted = 0.0;
            let mut absorbed_inside = 0.0;
            let mut late = 0.0;
            for (&t, up) in times.iter().zip(&powers) {
                let on_support = weighted(up, &inside);
                absorbed_weighted += dt * c.phi2(t).powf(ell) * weighted(up, &phi_l);
                absorbed_inside += dt * on_support;
                if t >= c.r.powf(c.alpha) {
                    late += dt * on_support;
                }
            }
            let lhs = weighted(u0, &phi_l) - absorbed_weighted - eps * ell * absorbed_inside;

            let fine = c.natural_grid(points)?;
            check_resolution(&fine, &c)?;
            let phi = c.phi1_field(&fine);
            let lap = fractional_laplacian(&phi, c.alpha)?;
            let h = fine.cell_volume();
            let x1: f64 = h * phi.values().iter().map(|f| f.powf(ell * pbar)).sum::<f64>();
            let t1: f64 = dt
                * times
                    .iter()
                    .map(|&t| c.phi2(t).powf((ell - 1.0) * pbar) * c.phi2_dt(t).abs().powf(pbar))
                    .sum::<f64>();
            let rhs_term1 = ell * late.powf(1.0 / cfg.p) * (x1 * t1).powf(1.0 / pbar);

            let x2: f64 = h * phi
                .values()
                .iter()
                .zip(lap.values())
                .map(|(f, d)| f.powf((ell - 1.0) * pbar) * d.abs().powf(pbar))
                .sum::<f64>();
            let t2: f64 = dt * times.iter().map(|&t| c.phi2(t).powf(ell * pbar)).sum::<f64>();
            let rhs_term2 = ell * young * x2 * t2;
            Ok(BudgetRow { b, lhs, rhs_term1, rhs_term2 })
        })
        .collect()
}

#[cfg(test)]
mod tests;
