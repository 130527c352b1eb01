//! Mass-limit classification, the decay bound `H`, the small-data certificate
//! and the scaled profile gap.

use crate::error::{invalid, Error, Result};
use crate::kernel::{kernel_grid, KernelSpec};
use crate::spectral::{lp_norm, Field};

/// One sample of a run's diagnostics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceEntry {
    pub t: f64,
    pub mass: f64,
    pub linf: f64,
    pub l2: f64,
    /// Running value of `∫_0^t ∫ u^p`.
    pub absorbed: f64,
    /// Cumulative mass removed by clamping negative values before powering.
    pub clamped: f64,
    /// Step size that produced this sample (0 for the initial entry).
    pub dt: f64,
}

/// Time series of [`TraceEntry`] values with strictly increasing times.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MassTrace {
    entries: Vec<TraceEntry>,
}

impl MassTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries(entries: Vec<TraceEntry>) -> Result<Self> {
        let mut trace = Self::new();
        for e in entries {
            trace.push(e)?;
        }
        Ok(trace)
    }

    /// Appends an entry; its time must exceed the last recorded one.
    pub fn push(&mut self, entry: TraceEntry) -> Result<()> {
        if let Some(last) = self.entries.last() {
            if !(entry.t > last.t) {
                return Err(invalid(format!(
                    "trace times must increase strictly: {} after {}",
                    entry.t, last.t
                )));
            }
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn entries(&self) -> &[TraceEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn first(&self) -> Option<&TraceEntry> {
        self.entries.first()
    }

    pub fn last(&self) -> Option<&TraceEntry> {
        self.entries.last()
    }
}

/// `1 + α/N`.
pub fn critical_exponent(alpha: f64, dim: usize) -> f64 {
    1.0 + alpha / dim as f64
}

/// `H(t) = min{C^p t^{-N(p-1)/α} m_0^p, ‖u_0‖_p^p}`, the bound on `∫ u^p(t)`
/// obtained from the linear decay estimate. At `t = 0` only the second
/// branch applies.
pub fn decay_bound_h(t: f64, p: f64, alpha: f64, dim: usize, mass0: f64, lp0: f64, c_emp: f64) -> f64 {
    let k = dim as f64 * (p - 1.0) / alpha;
    let plateau = lp0.powf(p);
    if t <= 0.0 {
        return plateau;
    }
    ((c_emp * mass0).powf(p) * t.powf(-k)).min(plateau)
}

/// `∫_0^∞ H(t) dt`, split at the crossover where both branches agree.
pub fn decay_bound_integral(p: f64, alpha: f64, dim: usize, mass0: f64, lp0: f64, c_emp: f64) -> Result<f64> {
    let critical = critical_exponent(alpha, dim);
    if !(p > critical) {
        return Err(Error::Diverges { p, critical });
    }
    let k = dim as f64 * (p - 1.0) / alpha;
    let a = (c_emp * mass0).powf(p);
    let b = lp0.powf(p);
    if a == 0.0 || b == 0.0 {
        return Ok(0.0);
    }
    let crossover = (a / b).powf(1.0 / k);
    Ok(b * crossover * k / (k - 1.0))
}

/// Lower bound `ε (m_0 - ε^{p-1} ∫_0^∞ H)` on the limiting mass of the
/// absorbing problem started from `ε u_0`. A positive value certifies that the
/// mass does not vanish.
pub fn small_data_mass_bound(
    eps: f64,
    p: f64,
    alpha: f64,
    dim: usize,
    mass0: f64,
    lp0: f64,
    c_emp: f64,
) -> Result<f64> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(invalid("eps must lie in (0,1]"));
    }
    let integral = decay_bound_integral(p, alpha, dim, mass0, lp0, c_emp)?;
    Ok(eps * (mass0 - eps.powf(p - 1.0) * integral))
}

/// The `ε ∈ (0, 1]` that maximises [`small_data_mass_bound`].
pub fn optimal_certified_eps(p: f64, alpha: f64, dim: usize, mass0: f64, lp0: f64, c_emp: f64) -> Result<f64> {
    let integral = decay_bound_integral(p, alpha, dim, mass0, lp0, c_emp)?;
    if integral == 0.0 {
        return Ok(1.0);
    }
    Ok((mass0 / (p * integral)).powf(1.0 / (p - 1.0)).min(1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Regime {
    PositiveLimit,
    Vanishing,
    Inconclusive,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::PositiveLimit => "positive_limit",
            Regime::Vanishing => "vanishing",
            Regime::Inconclusive => "inconclusive",
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "positive_limit" => Ok(Regime::PositiveLimit),
            "vanishing" => Ok(Regime::Vanishing),
            "inconclusive" => Ok(Regime::Inconclusive),
            other => Err(invalid(format!("unknown regime '{other}'"))),
        }
    }
}

/// Supporting numbers behind a [`DichotomyVerdict`].
#[derive(Clone, Debug, PartialEq)]
pub struct Evidence {
    /// `d log M / d log t` fitted over the final decade.
    pub plateau_rate: f64,
    /// The final decade `(t_hi / 10, t_hi)`.
    pub fit_window: (f64, f64),
    /// Slope over the decade before the final one.
    pub previous_rate: f64,
    /// Relative mass lost over the final decade.
    pub final_decade_loss: f64,
    /// Aitken extrapolation from three decade-spaced samples, if defined.
    pub extrapolated_limit: Option<f64>,
    pub diagnostic: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DichotomyVerdict {
    pub regime: Regime,
    pub m_inf_estimate: f64,
    pub evidence: Evidence,
}

/// Thresholds used by [`estimate_mass_limit_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MassLimitOptions {
    pub slope_tol: f64,
    pub slope_floor: f64,
    pub loss_tol: f64,
}

impl Default for MassLimitOptions {
    fn default() -> Self {
        MassLimitOptions { slope_tol: 0.01, slope_floor: 0.05, loss_tol: 0.01 }
    }
}

/// Classifies the long-time behaviour of `M(t)` with default thresholds.
pub fn estimate_mass_limit(trace: &MassTrace) -> DichotomyVerdict {
    estimate_mass_limit_with(trace, &MassLimitOptions::default())
}

fn log_log_slope(points: &[&TraceEntry]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().map(|e| (e.t.ln(), e.mass.ln())).collect();
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let (sxy, sxx) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (y - my), b + (x - mx) * (x - mx)));
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

fn sample_at_or_after<'a>(entries: &[&'a TraceEntry], t: f64) -> &'a TraceEntry {
    entries.iter().find(|e| e.t >= t * (1.0 - 1e-12)).copied().unwrap_or(entries[entries.len() - 1])
}

/// Fits `d log M / d log t` over the final two decades of `trace`.
///
/// A flat final decade (slope and relative loss under their tolerances) gives
/// [`Regime::PositiveLimit`] with the last mass as the estimate; a slope at or
/// below `-slope_floor` in both decades gives [`Regime::Vanishing`].
pub fn estimate_mass_limit_with(trace: &MassTrace, opts: &MassLimitOptions) -> DichotomyVerdict {
    let usable: Vec<&TraceEntry> = trace.entries().iter().filter(|e| e.t > 0.0 && e.mass > 0.0).collect();
    let last_mass = trace.last().map_or(0.0, |e| e.mass.max(0.0));
    let inconclusive = |diagnostic: String, evidence: Option<Evidence>| DichotomyVerdict {
        regime: Regime::Inconclusive,
        m_inf_estimate: last_mass,
        evidence: evidence.unwrap_or(Evidence {
            plateau_rate: f64::NAN,
            fit_window: (f64::NAN, f64::NAN),
            previous_rate: f64::NAN,
            final_decade_loss: f64::NAN,
            extrapolated_limit: None,
            diagnostic: Some(diagnostic.clone()),
        }),
    };
    if usable.len() < 3 {
        return inconclusive("trace too short".to_string(), None);
    }
    let t_lo = usable[0].t;
    let t_hi = usable[usable.len() - 1].t;
    if t_hi / t_lo < 100.0 {
        return inconclusive(format!("trace spans only {:.3} decades (need 2)", (t_hi / t_lo).log10()), None);
    }
    let decade_start = t_hi / 10.0;
    let final_decade: Vec<&TraceEntry> = usable.iter().copied().filter(|e| e.t >= decade_start * (1.0 - 1e-12)).collect();
    let previous: Vec<&TraceEntry> = usable
        .iter()
        .copied()
        .filter(|e| e.t >= decade_start / 10.0 * (1.0 - 1e-12) && e.t <= decade_start * (1.0 + 1e-12))
        .collect();
    if final_decade.len() < 2 || previous.len() < 2 {
        return inconclusive("too few samples per decade".to_string(), None);
    }
    let plateau_rate = log_log_slope(&final_decade);
    let previous_rate = log_log_slope(&previous);
    let start = final_decade[0];
    let final_decade_loss = (start.mass - last_mass) / start.mass;

    let m1 = sample_at_or_after(&usable, t_hi / 100.0).mass;
    let m2 = start.mass;
    let m3 = last_mass;
    let denom = (m3 - m2) - (m2 - m1);
    let extrapolated_limit = (denom != 0.0).then(|| m3 - (m3 - m2).powi(2) / denom).filter(|v| v.is_finite());

    let mut evidence = Evidence {
        plateau_rate,
        fit_window: (decade_start, t_hi),
        previous_rate,
        final_decade_loss,
        extrapolated_limit,
        diagnostic: None,
    };
    if plateau_rate.abs() < opts.slope_tol && final_decade_loss.abs() < opts.loss_tol && last_mass > 0.0 {
        DichotomyVerdict { regime: Regime::PositiveLimit, m_inf_estimate: last_mass, evidence }
    } else if plateau_rate <= -opts.slope_floor && previous_rate <= -opts.slope_floor {
        DichotomyVerdict { regime: Regime::Vanishing, m_inf_estimate: 0.0, evidence }
    } else {
        evidence.diagnostic = Some(format!(
            "final-decade slope {plateau_rate:.4}, previous {previous_rate:.4}, loss {final_decade_loss:.4}"
        ));
        inconclusive(String::new(), Some(evidence))
    }
}

/// `t^{(N/α)(1-1/q)} ‖u - M_∞ P_α(t)‖_q` with the torus-wrapped kernel.
pub fn scaled_profile_gap(u: &Field, m_inf: f64, t: f64, q: f64, alpha: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(invalid(format!("time must be positive, got {t}")));
    }
    let spec = KernelSpec::new(alpha, u.grid().dim())?;
    let profile = kernel_grid(&spec, u.grid(), t)?.scaled(m_inf);
    let gap = lp_norm(&u.sub(&profile)?, q)?;
    let n = u.grid().dim() as f64;
    let exponent = if q.is_infinite() { n / alpha } else { n / alpha * (1.0 - 1.0 / q) };
    Ok(t.powf(exponent) * gap)
}
