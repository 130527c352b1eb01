//! Exponential time differencing for `u_t = -Λ^α u + λ u^p` on the torus.
//!
//! The linear part is integrated exactly in Fourier space and the power
//! nonlinearity explicitly, either to first order (ETD1) or with the two-stage
//! Runge-Kutta correction of Cox and Matthews (ETD2). Time steps follow the
//! nonlinear time scale `θ / ‖u‖_∞^{p-1}` and land on geometrically spaced
//! trace times, snapshot times and the final time.

use std::cell::RefCell;
use std::fmt;
use std::rc::Rc;
use std::str::FromStr;

use rustfft::num_complex::Complex64;

use crate::asymptotics::{MassTrace, TraceEntry};
use crate::error::{invalid, Error, Result};
use crate::spectral::{
    self, check_alpha, forward_transform, inverse_transform, pointwise_power, two_thirds_truncate,
    Field, Spectrum,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Etd1,
    Etd2,
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "etd1" => Ok(Scheme::Etd1),
            "etd2" => Ok(Scheme::Etd2),
            other => Err(invalid(format!("unknown scheme '{other}' (expected ETD1 or ETD2)"))),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Etd1 => "ETD1",
            Scheme::Etd2 => "ETD2",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Outcome {
    Completed,
    BlownUp,
    UnderResolved,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Completed => "completed",
            Outcome::BlownUp => "blown_up",
            Outcome::UnderResolved => "under_resolved",
        }
    }

    /// Process exit code used by the `simulate` command.
    pub fn exit_code(&self) -> i32 {
        match self {
            Outcome::Completed => 0,
            Outcome::BlownUp => 2,
            Outcome::UnderResolved => 3,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Outcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "completed" => Ok(Outcome::Completed),
            "blown_up" => Ok(Outcome::BlownUp),
            "under_resolved" => Ok(Outcome::UnderResolved),
            other => Err(invalid(format!("unknown outcome '{other}'"))),
        }
    }
}

/// Parameters of a single run.
///
/// Setting `dt_min == dt_max` selects fixed steps of that size: trace samples
/// are then taken at the first step on or after each geometric trace time
/// instead of forcing steps to land on it.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub alpha: f64,
    pub p: f64,
    /// `-1` (absorption), `+1` (source) or `0` (linear flow).
    pub lambda: f64,
    pub scheme: Scheme,
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub safety_theta: f64,
    /// Sup-norm level `U_max` treated as blow-up.
    pub blowup_threshold: f64,
    pub t_end: f64,
    pub snapshot_times: Vec<f64>,
    /// Negative values below `-clamp_tol` mark the run as under-resolved.
    pub clamp_tol: f64,
    /// Ratio between consecutive trace times.
    pub trace_ratio: f64,
    pub max_steps: usize,
    /// 2/3-rule dealiasing of the nonlinearity for integer `p`.
    pub dealias: bool,
}

impl SolverConfig {
    pub fn new(alpha: f64, p: f64, lambda: f64) -> Self {
        SolverConfig {
            alpha,
            p,
            lambda,
            scheme: Scheme::Etd2,
            dt_init: 1e-3,
            dt_min: 1e-12,
            dt_max: 1.0,
            safety_theta: 0.1,
            blowup_threshold: 1e8,
            t_end: 1.0,
            snapshot_times: Vec::new(),
            clamp_tol: 1e-8,
            trace_ratio: 1.1,
            max_steps: 10_000_000,
            dealias: true,
        }
    }

    /// A fixed-step configuration with `dt_min = dt_init = dt_max = dt`.
    pub fn fixed_step(mut self, dt: f64) -> Self {
        self.dt_min = dt;
        self.dt_init = dt;
        self.dt_max = dt;
        self
    }

    pub fn is_fixed_step(&self) -> bool {
        self.dt_min == self.dt_max
    }

    /// Checks the parameter ranges that do not depend on the initial data.
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if !(self.p > 1.0) || !self.p.is_finite() {
            return Err(invalid("p must exceed 1"));
        }
        if ![-1.0, 0.0, 1.0].contains(&self.lambda) {
            return Err(invalid("lambda must be -1, 0 or 1"));
        }
        let positive = [
            ("dt_init", self.dt_init),
            ("dt_min", self.dt_min),
            ("dt_max", self.dt_max),
            ("safety_theta", self.safety_theta),
            ("blowup_threshold", self.blowup_threshold),
            ("t_end", self.t_end),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive and finite")));
            }
        }
        if !(self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return Err(invalid("time steps must satisfy dt_min <= dt_init <= dt_max"));
        }
        if !(self.clamp_tol >= 0.0) {
            return Err(invalid("clamp_tol must be nonnegative"));
        }
        if !(self.trace_ratio > 1.0) {
            return Err(invalid("trace_ratio must exceed 1"));
        }
        if self.max_steps == 0 {
            return Err(invalid("max_steps must be positive"));
        }
        if let Some(bad) = self.snapshot_times.iter().find(|&&s| !(s >= 0.0 && s <= self.t_end)) {
            return Err(invalid(format!("snapshot time {bad} outside [0, t_end]")));
        }
        Ok(())
    }
}

/// Solution and running integrals at one instant.
#[derive(Clone, Debug)]
pub struct StepState {
    pub time: f64,
    pub u: Field,
    /// `∫_0^t ∫ u^p dx ds`.
    pub absorbed_integral: f64,
    pub clamped_mass_total: f64,
    /// Number of steps in which some value fell below `-clamp_tol`.
    pub clamp_violations: usize,
}

impl StepState {
    pub fn initial(u0: Field) -> Self {
        StepState { time: 0.0, u: u0, absorbed_integral: 0.0, clamped_mass_total: 0.0, clamp_violations: 0 }
    }

    /// Trace sample of this state.
    pub fn sample(&self, dt: f64) -> TraceEntry {
        let h = self.u.grid().cell_volume();
        let (mut sum, mut sq, mut max) = (0.0, 0.0, 0.0_f64);
        for &v in self.u.values() {
            sum += v;
            sq += v * v;
            max = max.max(v.abs());
        }
        TraceEntry {
            t: self.time,
            mass: h * sum,
            linf: max,
            l2: (h * sq).sqrt(),
            absorbed: self.absorbed_integral,
            clamped: self.clamped_mass_total,
            dt,
        }
    }
}

/// Result of [`adaptive_dt`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepSize {
    pub dt: f64,
    /// The nonlinear time scale lay below `dt_min` while `‖u‖_∞ < U_max`.
    pub floored: bool,
}

/// `clamp(θ / ‖u‖_∞^{p-1}, dt_min, dt_max)`.
pub fn adaptive_dt(state: &StepState, cfg: &SolverConfig) -> Result<StepSize> {
    state.u.check_finite()?;
    let linf = state.u.max_abs();
    let raw = cfg.safety_theta / linf.powf(cfg.p - 1.0);
    let floored = raw < cfg.dt_min && linf < cfg.blowup_threshold;
    Ok(StepSize { dt: raw.clamp(cfg.dt_min, cfg.dt_max), floored })
}

/// `(c^{1-p} - λ(p-1)t)^{-1/(p-1)}`: the spatially constant solution.
pub fn ode_reference(c: f64, p: f64, lambda: f64, t: f64) -> Result<f64> {
    if !(c >= 0.0) || !(p > 1.0) || !(t >= 0.0) {
        return Err(invalid("ode_reference needs c >= 0, p > 1 and t >= 0"));
    }
    if c == 0.0 {
        return Ok(0.0);
    }
    let base = c.powf(1.0 - p) - lambda * (p - 1.0) * t;
    if !(base > 0.0) {
        return Err(invalid(format!(
            "t = {t} is at or past the blow-up time {}",
            c.powf(1.0 - p) / (p - 1.0)
        )));
    }
    Ok(base.powf(-1.0 / (p - 1.0)))
}

/// `φ_1(z) = (e^z - 1)/z` and `φ_2(z) = (e^z - 1 - z)/z²`, together with `e^z`.
fn phi_functions(z: f64) -> (f64, f64, f64) {
    let em1 = z.exp_m1();
    let phi1 = if z.abs() < 1e-4 { 1.0 + z * (0.5 + z * (1.0 / 6.0 + z / 24.0)) } else { em1 / z };
    let phi2 = if z.abs() < 0.1 {
        let mut term = 0.5;
        let mut sum = 0.5;
        for k in 3..=11 {
            term *= z / k as f64;
            sum += term;
        }
        sum
    } else {
        (em1 - z) / (z * z)
    };
    (z.exp(), phi1, phi2)
}

/// `(e^z, φ_1(z), φ_2(z))` at `z = -dt |ξ|^α` for every mode.
type Weights = Vec<(f64, f64, f64)>;

/// Per-run spectral data shared by all steps.
struct Stepper {
    symbol: Vec<f64>,
    p: f64,
    lambda: f64,
    scheme: Scheme,
    clamp_tol: f64,
    dealias: bool,
    weights: RefCell<Option<(f64, Rc<Weights>)>>,
}

struct Nonlinear {
    spectrum: Spectrum,
    integral: f64,
    clamped: f64,
    violated: bool,
}

impl Stepper {
    fn new(cfg: &SolverConfig, u: &Field) -> Self {
        let alpha = cfg.alpha;
        let symbol = u.grid().abs_wavenumbers().into_iter().map(|xi| if xi == 0.0 { 0.0 } else { xi.powf(alpha) }).collect();
        Stepper {
            symbol,
            p: cfg.p,
            lambda: cfg.lambda,
            scheme: cfg.scheme,
            clamp_tol: cfg.clamp_tol,
            dealias: cfg.dealias && cfg.p.fract() == 0.0,
            weights: RefCell::new(None),
        }
    }

    /// `(e^{-dt s}, φ_1(-dt s), φ_2(-dt s))` per mode, reused while `dt` repeats.
    fn weights(&self, dt: f64) -> Rc<Weights> {
        let mut cache = self.weights.borrow_mut();
        match cache.as_ref() {
            Some((cached_dt, w)) if *cached_dt == dt => Rc::clone(w),
            _ => {
                let w = Rc::new(self.symbol.iter().map(|&s| phi_functions(-dt * s)).collect::<Vec<_>>());
                *cache = Some((dt, Rc::clone(&w)));
                w
            }
        }
    }

    /// Transform of `max(v, 0)^p`, where `v` is the (dealiased) field of `spectrum`.
    /// `field`, when given, must be the inverse transform of `spectrum`.
    fn nonlinear(&self, spectrum: &Spectrum, field: Option<&Field>) -> Result<Nonlinear> {
        let power = match field {
            Some(f) if !self.dealias => pointwise_power(f, self.p, self.clamp_tol)?,
            _ => {
                let mut filtered = spectrum.clone();
                if self.dealias {
                    two_thirds_truncate(&mut filtered);
                }
                pointwise_power(&inverse_transform(&filtered), self.p, self.clamp_tol)?
            }
        };
        let integral = spectral::integrate(&power.field);
        let mut transformed = forward_transform(&power.field)?;
        if self.dealias {
            two_thirds_truncate(&mut transformed);
        }
        Ok(Nonlinear {
            spectrum: transformed,
            integral,
            clamped: power.clamped_mass,
            violated: power.under_resolved,
        })
    }

    fn step(&self, state: &StepState, dt: f64) -> Result<StepState> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid(format!("time step must be positive, got {dt}")));
        }
        let grid = state.u.grid().clone();
        let u_hat = forward_transform(&state.u)?;
        let weights = self.weights(dt);

        if self.lambda == 0.0 {
            let next: Vec<Complex64> =
                u_hat.coefficients().iter().zip(weights.iter()).map(|(c, w)| c * w.0).collect();
            let u = inverse_transform(&Spectrum::new(grid, next)?);
            u.check_finite()?;
            return Ok(StepState { time: state.time + dt, u, ..state.clone() });
        }

        let lambda = self.lambda;
        let first = self.nonlinear(&u_hat, Some(&state.u))?;
        let a_hat: Vec<Complex64> = u_hat
            .coefficients()
            .iter()
            .zip(first.spectrum.coefficients())
            .zip(weights.iter())
            .map(|((c, n), w)| c * w.0 + n * (lambda * dt * w.1))
            .collect();
        let a_hat = Spectrum::new(grid, a_hat)?;

        let mut clamped = first.clamped;
        let mut violated = first.violated;
        let (next_hat, absorbed_increment) = match self.scheme {
            Scheme::Etd1 => (a_hat, dt * first.integral),
            Scheme::Etd2 => {
                let second = self.nonlinear(&a_hat, None)?;
                clamped += second.clamped;
                violated |= second.violated;
                let grid = a_hat.grid().clone();
                let mut next = a_hat.into_coefficients();
                for (((c, na), nu), w) in next
                    .iter_mut()
                    .zip(second.spectrum.coefficients())
                    .zip(first.spectrum.coefficients())
                    .zip(weights.iter())
                {
                    *c += (na - nu) * (lambda * dt * w.2);
                }
                (Spectrum::new(grid, next)?, 0.5 * dt * (first.integral + second.integral))
            }
        };
        let u = inverse_transform(&next_hat);
        u.check_finite()?;
        Ok(StepState {
            time: state.time + dt,
            u,
            absorbed_integral: state.absorbed_integral + absorbed_increment,
            clamped_mass_total: state.clamped_mass_total + clamped,
            clamp_violations: state.clamp_violations + usize::from(violated),
        })
    }
}

/// Advances `state` by one exponential-integrator step of size `dt`.
///
/// Returns [`Error::NonFinite`] when the new state overflows.
pub fn etd_step(state: &StepState, cfg: &SolverConfig, dt: f64) -> Result<StepState> {
    check_alpha(cfg.alpha)?;
    state.u.check_finite()?;
    Stepper::new(cfg, &state.u).step(state, dt)
}

/// Verdict of [`detect_blowup`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlowupVerdict {
    pub blown_up: bool,
    pub time_estimate: Option<f64>,
}

const BLOWUP_WINDOW: usize = 10;

/// Decides whether the trace shows finite-time blow-up.
///
/// A run has blown up when the last sup-norm exceeds `U_max` (or is not
/// finite), or when the last step sat at `dt_min` while the sup-norm grew at
/// least tenfold over the last ten samples. The blow-up time is then estimated
/// by fitting a line to `‖u‖_∞^{-(p-1)}` over the last ten finite samples and
/// extrapolating it to zero.
pub fn detect_blowup(trace: &MassTrace, cfg: &SolverConfig) -> BlowupVerdict {
    let entries = trace.entries();
    let Some(last) = entries.last() else {
        return BlowupVerdict { blown_up: false, time_estimate: None };
    };
    let over_threshold = !last.linf.is_finite() || last.linf > cfg.blowup_threshold;
    let stalled = entries.len() > BLOWUP_WINDOW && last.dt <= cfg.dt_min && {
        let earlier = entries[entries.len() - 1 - BLOWUP_WINDOW].linf;
        last.linf >= 10.0 * earlier
    };
    if !(over_threshold || stalled) {
        return BlowupVerdict { blown_up: false, time_estimate: None };
    }
    BlowupVerdict { blown_up: true, time_estimate: Some(extrapolate_blowup_time(trace, cfg)) }
}

fn extrapolate_blowup_time(trace: &MassTrace, cfg: &SolverConfig) -> f64 {
    let finite: Vec<_> = trace.entries().iter().filter(|e| e.linf.is_finite() && e.linf > 0.0).collect();
    let t_last = trace.last().map_or(0.0, |e| e.t);
    let window = &finite[finite.len().saturating_sub(BLOWUP_WINDOW)..];
    if window.len() < 2 {
        return t_last;
    }
    let pts: Vec<(f64, f64)> = window.iter().map(|e| (e.t, e.linf.powf(1.0 - cfg.p))).collect();
    let n = pts.len() as f64;
    let (mt, my) = pts.iter().fold((0.0, 0.0), |(a, b), (t, y)| (a + t / n, b + y / n));
    let (sty, stt) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), (t, y)| (a + (t - mt) * (y - my), b + (t - mt) * (t - mt)));
    let slope = sty / stt;
    let estimate = if slope < 0.0 { mt - my / slope } else { t_last };
    estimate.clamp(t_last, t_last + cfg.dt_max)
}

/// Everything a run produces.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub outcome: Outcome,
    pub trace: MassTrace,
    pub blowup_time_estimate: Option<f64>,
    pub snapshots: Vec<(f64, Field)>,
    pub final_state: StepState,
    pub steps: usize,
    pub diagnostics: Vec<String>,
}

/// Geometric trace times `dt_init · ratio^k`.
struct TraceClock {
    next: f64,
    ratio: f64,
}

impl TraceClock {
    fn advance_past(&mut self, t: f64) {
        while self.next <= t {
            self.next *= self.ratio;
        }
    }
}

/// Integrates from `u0` up to `t_end`, blow-up, or the step budget.
pub fn run(cfg: &SolverConfig, u0: Field) -> Result<RunResult> {
    cfg.validate()?;
    u0.check_finite()?;
    if u0.min() < 0.0 {
        return Err(invalid("initial data must be nonnegative"));
    }
    if u0.max_abs() == 0.0 {
        return Err(invalid("initial data must not vanish identically"));
    }
    if !(cfg.blowup_threshold > u0.max_abs()) {
        return Err(invalid("blowup_threshold must exceed the initial sup-norm"));
    }

    let stepper = Stepper::new(cfg, &u0);
    let fixed = cfg.is_fixed_step();
    let dense = cfg.lambda > 0.0;
    let mut snapshot_times = cfg.snapshot_times.clone();
    snapshot_times.sort_by(f64::total_cmp);
    snapshot_times.dedup();
    let mut pending_snapshots = snapshot_times.into_iter().peekable();
    let mut snapshots = Vec::new();
    let mut clock = TraceClock { next: cfg.dt_init, ratio: cfg.trace_ratio };

    let mut state = StepState::initial(u0);
    let mut trace = MassTrace::new();
    trace.push(state.sample(0.0))?;
    while pending_snapshots.peek() == Some(&0.0) {
        snapshots.push((0.0, state.u.clone()));
        pending_snapshots.next();
    }

    let mut diagnostics = Vec::new();
    let mut floored = false;
    let mut steps = 0usize;
    let mut verdict = BlowupVerdict { blown_up: false, time_estimate: None };
    let mut budget_exhausted = false;
    let mut overflowed = false;

    while state.time < cfg.t_end {
        if steps >= cfg.max_steps {
            budget_exhausted = true;
            diagnostics.push(format!("step budget of {} exhausted at t = {}", cfg.max_steps, state.time));
            break;
        }
        let size = if fixed { StepSize { dt: cfg.dt_min, floored: false } } else { adaptive_dt(&state, cfg)? };
        floored |= size.floored;
        let mut target = cfg.t_end;
        if let Some(&s) = pending_snapshots.peek() {
            target = target.min(s);
        }
        if !fixed {
            target = target.min(clock.next);
        }
        let dt = size.dt.min(target - state.time);
        let landed = dt == target - state.time;

        let next = match stepper.step(&state, dt) {
            Ok(next) => next,
            Err(Error::NonFinite { .. }) => {
                overflowed = true;
                diagnostics.push(format!("non-finite values after a step of {dt:e} from t = {}", state.time));
                break;
            }
            Err(e) => return Err(e),
        };
        steps += 1;
        state = next;
        if landed {
            state.time = target;
        }

        let due_trace = state.time >= clock.next;
        clock.advance_past(state.time);
        let mut due_snapshot = false;
        while pending_snapshots.peek().is_some_and(|&s| s <= state.time) {
            pending_snapshots.next();
            due_snapshot = true;
        }
        if due_snapshot {
            snapshots.push((state.time, state.u.clone()));
        }
        let entry = state.sample(dt);
        let finished = state.time >= cfg.t_end;
        let exploded = entry.linf > cfg.blowup_threshold;
        if dense || due_trace || due_snapshot || finished || exploded {
            trace.push(entry)?;
            verdict = detect_blowup(&trace, cfg);
            if verdict.blown_up {
                break;
            }
        }
    }

    if overflowed && cfg.lambda > 0.0 {
        let mut v = detect_blowup(&trace, cfg);
        if !v.blown_up {
            v = BlowupVerdict { blown_up: true, time_estimate: Some(extrapolate_blowup_time(&trace, cfg)) };
        }
        verdict = v;
    }

    if state.clamp_violations > 0 {
        diagnostics.push(format!(
            "{} steps produced values below -clamp_tol = {:e}",
            state.clamp_violations, cfg.clamp_tol
        ));
    }
    if floored && !verdict.blown_up {
        diagnostics.push("nonlinear time scale fell below dt_min".to_string());
    }
    let outcome = if verdict.blown_up {
        Outcome::BlownUp
    } else if overflowed || budget_exhausted || floored || state.clamp_violations > 0 {
        Outcome::UnderResolved
    } else {
        Outcome::Completed
    };
    for d in &diagnostics {
        log::info!("{d}");
    }
    Ok(RunResult {
        outcome,
        trace,
        blowup_time_estimate: verdict.time_estimate,
        snapshots,
        final_state: state,
        steps,
        diagnostics,
    })
}
