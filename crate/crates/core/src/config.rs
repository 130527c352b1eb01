//! `key = value` run configuration files.
//!
//! Blank lines and text after `#` are ignored. Every key is optional; the
//! defaults are those of [`RunConfig::default`].
//!
//! | key                 | default          | meaning                                       |
//! |---------------------|------------------|-----------------------------------------------|
//! | `alpha`             | 1                | order of `Λ^α`, in (0, 2]                     |
//! | `p`                 | 2                | power of the nonlinearity, > 1                |
//! | `lambda`            | -1               | -1 absorption, 1 source, 0 linear             |
//! | `dim`               | 1                | 1 or 2                                        |
//! | `grid_points`       | 1024             | points per axis, a power of two               |
//! | `domain_length`     | 64               | torus side, or `auto`                         |
//! | `tail_budget`       | 1e-3             | kernel mass allowed outside `L/4` (`auto`)    |
//! | `scheme`            | ETD2             | ETD1 or ETD2                                  |
//! | `dt_init`           | 1e-3             | first step and first trace time               |
//! | `dt_min`, `dt_max`  | 1e-12, 1         | step bounds; equal values give fixed steps    |
//! | `safety_theta`      | 0.1              | `dt = θ / ‖u‖_∞^{p-1}`                        |
//! | `blowup_threshold`  | 1e8              | sup-norm treated as blow-up                   |
//! | `t_end`             | 10               | final time                                    |
//! | `clamp_tol`         | 1e-8             | tolerated negative values                     |
//! | `initial_condition` | gaussian(1, 1)   | `gaussian(mass, width)`, `constant(c)`, `indicator(mass, half_width)` |
//! | `epsilon_scale`     | 1                | multiplies the initial condition              |
//! | `snapshot_times`    | (none)           | comma-separated times                         |
//! | `max_steps`         | 10000000         | step budget                                   |
//! | `seed`              | 0                | recorded with the run                         |

use std::collections::HashSet;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::kernel::{domain_length_for_tail_budget, KernelSpec};
use crate::solver::{Scheme, SolverConfig};
use crate::spectral::{integrate, Field, Grid};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialCondition {
    Gaussian { mass: f64, width: f64 },
    Constant { c: f64 },
    Indicator { mass: f64, half_width: f64 },
}

impl InitialCondition {
    fn parse(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        let open = s.find('(').ok_or("initial_condition must look like name(args)")?;
        if !s.ends_with(')') {
            return Err("initial_condition is missing ')'".into());
        }
        let name = s[..open].trim();
        let args: Vec<f64> = s[open + 1..s.len() - 1]
            .split(',')
            .map(|a| a.trim().parse::<f64>().map_err(|e| format!("bad argument '{}': {e}", a.trim())))
            .collect::<std::result::Result<_, _>>()?;
        let positive = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(format!("{what} must be positive"))
            }
        };
        match (name, args.as_slice()) {
            ("gaussian", &[mass, width]) => {
                Ok(InitialCondition::Gaussian { mass: positive(mass, "mass")?, width: positive(width, "width")? })
            }
            ("constant", &[c]) => Ok(InitialCondition::Constant { c: positive(c, "constant")? }),
            ("indicator", &[mass, half_width]) => Ok(InitialCondition::Indicator {
                mass: positive(mass, "mass")?,
                half_width: positive(half_width, "half_width")?,
            }),
            _ => Err(format!(
                "unknown initial_condition '{s}' (expected gaussian(mass, width), constant(c) or indicator(mass, half_width))"
            )),
        }
    }

    /// Samples the profile on `grid`. Gaussian and indicator data are rescaled
    /// so that the discrete mass equals the requested mass exactly.
    pub fn sample(&self, grid: &Grid) -> Result<Field> {
        let radius = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let (field, mass) = match *self {
            InitialCondition::Constant { c } => return Ok(Field::constant(grid.clone(), c)),
            InitialCondition::Gaussian { mass, width } => {
                (Field::from_fn(grid.clone(), |x| (-radius(x).powi(2) / (2.0 * width * width)).exp()), mass)
            }
            InitialCondition::Indicator { mass, half_width } => {
                (Field::from_fn(grid.clone(), |x| if radius(x) <= half_width { 1.0 } else { 0.0 }), mass)
            }
        };
        let raw = integrate(&field);
        if !(raw > 0.0) {
            return Err(Error::UnderResolved("initial condition has no support on the grid".into()));
        }
        Ok(field.scaled(mass / raw))
    }

    /// Mass of the continuum profile on `ℝ^N` (`None` for constants).
    pub fn nominal_mass(&self) -> Option<f64> {
        match *self {
            InitialCondition::Gaussian { mass, .. } | InitialCondition::Indicator { mass, .. } => Some(mass),
            InitialCondition::Constant { .. } => None,
        }
    }
}

impl std::fmt::Display for InitialCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InitialCondition::Gaussian { mass, width } => write!(f, "gaussian({mass}, {width})"),
            InitialCondition::Constant { c } => write!(f, "constant({c})"),
            InitialCondition::Indicator { mass, half_width } => write!(f, "indicator({mass}, {half_width})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DomainLength {
    Fixed(f64),
    /// Chosen from `t_end` and `tail_budget`.
    Auto,
}

/// A fully validated run configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub alpha: f64,
    pub p: f64,
    pub lambda: f64,
    pub dim: usize,
    pub grid_points: usize,
    pub domain_length: DomainLength,
    pub tail_budget: f64,
    pub scheme: Scheme,
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub safety_theta: f64,
    pub blowup_threshold: f64,
    pub t_end: f64,
    pub clamp_tol: f64,
    pub initial_condition: InitialCondition,
    pub epsilon_scale: f64,
    pub snapshot_times: Vec<f64>,
    pub max_steps: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            alpha: 1.0,
            p: 2.0,
            lambda: -1.0,
            dim: 1,
            grid_points: 1024,
            domain_length: DomainLength::Fixed(64.0),
            tail_budget: 1e-3,
            scheme: Scheme::Etd2,
            dt_init: 1e-3,
            dt_min: 1e-12,
            dt_max: 1.0,
            safety_theta: 0.1,
            blowup_threshold: 1e8,
            t_end: 10.0,
            clamp_tol: 1e-8,
            initial_condition: InitialCondition::Gaussian { mass: 1.0, width: 1.0 },
            epsilon_scale: 1.0,
            snapshot_times: Vec::new(),
            max_steps: 10_000_000,
            seed: 0,
        }
    }
}

const KEYS: &[&str] = &[
    "alpha",
    "p",
    "lambda",
    "dim",
    "grid_points",
    "domain_length",
    "tail_budget",
    "scheme",
    "dt_init",
    "dt_min",
    "dt_max",
    "safety_theta",
    "blowup_threshold",
    "t_end",
    "clamp_tol",
    "initial_condition",
    "epsilon_scale",
    "snapshot_times",
    "max_steps",
    "seed",
];

fn num(value: &str) -> std::result::Result<f64, String> {
    let v: f64 = value.parse().map_err(|_| format!("'{value}' is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("'{value}' is not finite"))
    }
}

fn positive(value: &str, key: &str) -> std::result::Result<f64, String> {
    let v = num(value)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("{key} must be positive"))
    }
}

fn count(value: &str) -> std::result::Result<u64, String> {
    value.parse::<u64>().map_err(|_| format!("'{value}' is not a nonnegative integer"))
}

impl RunConfig {
    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let value = value.trim();
        match key {
            "alpha" => {
                let a = num(value)?;
                if !(a > 0.0 && a <= 2.0) {
                    return Err("alpha must lie in (0,2]".into());
                }
                self.alpha = a;
            }
            "p" => {
                let p = num(value)?;
                if !(p > 1.0) {
                    return Err("p must exceed 1".into());
                }
                self.p = p;
            }
            "lambda" => {
                let l = num(value)?;
                if ![-1.0, 0.0, 1.0].contains(&l) {
                    return Err("lambda must be -1, 0 or 1".into());
                }
                self.lambda = l;
            }
            "dim" => {
                let d = count(value)?;
                if d != 1 && d != 2 {
                    return Err("dim must be 1 or 2".into());
                }
                self.dim = d as usize;
            }
            "grid_points" => {
                let n = count(value)?;
                if n < 8 || !n.is_power_of_two() {
                    return Err("grid_points must be a power of two, at least 8".into());
                }
                self.grid_points = n as usize;
            }
            "domain_length" => {
                self.domain_length = if value.eq_ignore_ascii_case("auto") {
                    DomainLength::Auto
                } else {
                    DomainLength::Fixed(positive(value, key)?)
                };
            }
            "tail_budget" => {
                let b = num(value)?;
                if !(b > 0.0 && b < 1.0) {
                    return Err("tail_budget must lie in (0,1)".into());
                }
                self.tail_budget = b;
            }
            "scheme" => self.scheme = value.parse().map_err(|e: Error| e.to_string())?,
            "dt_init" => self.dt_init = positive(value, key)?,
            "dt_min" => self.dt_min = positive(value, key)?,
            "dt_max" => self.dt_max = positive(value, key)?,
            "safety_theta" => self.safety_theta = positive(value, key)?,
            "blowup_threshold" => self.blowup_threshold = positive(value, key)?,
            "t_end" => self.t_end = positive(value, key)?,
            "clamp_tol" => {
                let c = num(value)?;
                if c < 0.0 {
                    return Err("clamp_tol must be nonnegative".into());
                }
                self.clamp_tol = c;
            }
            "initial_condition" => self.initial_condition = InitialCondition::parse(value)?,
            "epsilon_scale" => self.epsilon_scale = positive(value, key)?,
            "snapshot_times" => {
                self.snapshot_times = if value.is_empty() {
                    Vec::new()
                } else {
                    value.split(',').map(|v| num(v.trim())).collect::<std::result::Result<_, _>>()?
                };
                if self.snapshot_times.iter().any(|&t| t < 0.0) {
                    return Err("snapshot_times must be nonnegative".into());
                }
            }
            "max_steps" => {
                let m = count(value)?;
                if m == 0 {
                    return Err("max_steps must be positive".into());
                }
                self.max_steps = m as usize;
            }
            "seed" => self.seed = count(value)?,
            other => return Err(format!("unknown key '{other}'")),
        }
        Ok(())
    }

    /// Checks constraints between keys; the error names the offending key.
    pub fn cross_check(&self) -> std::result::Result<(), (&'static str, String)> {
        if !(self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return Err(("dt_init", "time steps must satisfy dt_min <= dt_init <= dt_max".into()));
        }
        if let Some(t) = self.snapshot_times.iter().find(|&&t| t > self.t_end) {
            return Err(("snapshot_times", format!("snapshot time {t} exceeds t_end")));
        }
        Ok(())
    }

    /// Canonical text form; parsing it yields an identical configuration.
    pub fn to_text(&self) -> String {
        let domain = match self.domain_length {
            DomainLength::Fixed(l) => l.to_string(),
            DomainLength::Auto => "auto".to_string(),
        };
        let snaps: Vec<String> = self.snapshot_times.iter().map(|t| t.to_string()).collect();
        let lines = [
            ("alpha", self.alpha.to_string()),
            ("p", self.p.to_string()),
            ("lambda", self.lambda.to_string()),
            ("dim", self.dim.to_string()),
            ("grid_points", self.grid_points.to_string()),
            ("domain_length", domain),
            ("tail_budget", self.tail_budget.to_string()),
            ("scheme", self.scheme.to_string()),
            ("dt_init", self.dt_init.to_string()),
            ("dt_min", self.dt_min.to_string()),
            ("dt_max", self.dt_max.to_string()),
            ("safety_theta", self.safety_theta.to_string()),
            ("blowup_threshold", self.blowup_threshold.to_string()),
            ("t_end", self.t_end.to_string()),
            ("clamp_tol", self.clamp_tol.to_string()),
            ("initial_condition", self.initial_condition.to_string()),
            ("epsilon_scale", self.epsilon_scale.to_string()),
            ("snapshot_times", snaps.join(", ")),
            ("max_steps", self.max_steps.to_string()),
            ("seed", self.seed.to_string()),
        ];
        lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn critical_exponent(&self) -> f64 {
        crate::asymptotics::critical_exponent(self.alpha, self.dim)
    }

    pub fn resolved_length(&self) -> Result<f64> {
        match self.domain_length {
            DomainLength::Fixed(l) => Ok(l),
            DomainLength::Auto => {
                domain_length_for_tail_budget(&KernelSpec::new(self.alpha, self.dim)?, self.t_end, self.tail_budget)
            }
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.dim, self.grid_points, self.resolved_length()?)
    }

    /// `epsilon_scale` times the sampled initial condition.
    pub fn initial_field(&self, grid: &Grid) -> Result<Field> {
        Ok(self.initial_condition.sample(grid)?.scaled(self.epsilon_scale))
    }

    pub fn solver_config(&self) -> SolverConfig {
        let mut cfg = SolverConfig::new(self.alpha, self.p, self.lambda);
        cfg.scheme = self.scheme;
        cfg.dt_init = self.dt_init;
        cfg.dt_min = self.dt_min;
        cfg.dt_max = self.dt_max;
        cfg.safety_theta = self.safety_theta;
        cfg.blowup_threshold = self.blowup_threshold;
        cfg.t_end = self.t_end;
        cfg.clamp_tol = self.clamp_tol;
        cfg.snapshot_times = self.snapshot_times.clone();
        cfg.max_steps = self.max_steps;
        cfg
    }
}

/// Splits a line into `(key, value)`, ignoring comments. `None` for blank lines.
pub(crate) fn split_line(line: &str) -> Option<std::result::Result<(&str, &str), String>> {
    let content = line.split('#').next().unwrap_or("").trim();
    if content.is_empty() {
        return None;
    }
    Some(match content.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim(), v.trim())),
        _ => Err(format!("expected 'key = value', found '{content}'")),
    })
}

/// Parses a configuration file, applying defaults for missing keys.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_lines(text.lines().enumerate().map(|(i, l)| (i + 1, l)))
}

pub(crate) fn parse_lines<'a>(lines: impl Iterator<Item = (usize, &'a str)>) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut seen = HashSet::new();
    let mut key_lines = Vec::new();
    for (line, text) in lines {
        let Some(parsed) = split_line(text) else { continue };
        let (key, value) = parsed.map_err(|message| Error::Config { line, message })?;
        if !KEYS.contains(&key) {
            return Err(Error::Config { line, message: format!("unknown key '{key}'") });
        }
        if !seen.insert(key.to_string()) {
            return Err(Error::Config { line, message: format!("duplicate key '{key}'") });
        }
        cfg.set(key, value).map_err(|message| Error::Config { line, message })?;
        key_lines.push((key.to_string(), line));
    }
    cfg.cross_check().map_err(|(key, message)| {
        let line = key_lines.iter().find(|(k, _)| k == key).map_or(0, |(_, l)| *l);
        Error::Config { line, message }
    })?;
    Ok(cfg)
}

/// `‖G‖_q` for the unit-mass Gaussian of standard deviation `width` in `dim`
/// dimensions.
pub fn gaussian_lq_norm(width: f64, dim: usize, q: f64) -> f64 {
    let d = dim as f64;
    let peak = (2.0 * PI * width * width).powf(-d / 2.0);
    if q.is_infinite() {
        return peak;
    }
    peak * (2.0 * PI * width * width / q).powf(d / (2.0 * q))
}
