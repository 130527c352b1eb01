//! Parameter sweeps, per-run output directories and summary tables.
//!
//! A campaign file is a run configuration (see [`crate::config`]) plus optional
//! lines
//!
//! ```text
//! sweep.alpha = 1, 1.5
//! sweep.p = 1.5, 2, 3
//! sweep.lambda = -1
//! sweep.epsilon_scale = 1, 0.1
//! max_parallel = 2
//! max_runs = 512
//! ```
//!
//! Runs are the cartesian product of the sweep lists (alpha slowest,
//! epsilon_scale fastest). Each run lives in `<out>/<hash>/`, where the hash is
//! taken over the canonical text of its configuration, and holds
//! `config.txt`, `trace.csv`, `report.csv` and `result.csv`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::asymptotics::{estimate_mass_limit, scaled_profile_gap, DichotomyVerdict, MassTrace, Regime};
use crate::config::{parse_lines, split_line, RunConfig};
use crate::error::{invalid, Error, Result};
use crate::io::{fmt_float, fmt_optional, write_snapshot, write_trace};
use crate::solver::{run, Outcome, RunResult};
use crate::spectral::Field;

pub const SUMMARY_HEADER: &str = "alpha,p,lambda,eps,p_critical,regime,M_inf,blowup_T,outcome";
pub const REPORT_HEADER: &str = "regime,M_inf,plateau_rate,t_lo,t_hi,gap_q1_last,gap_q2_last";

#[derive(Clone, Debug, PartialEq)]
pub struct CampaignSpec {
    pub base: RunConfig,
    pub alpha: Vec<f64>,
    pub p: Vec<f64>,
    pub lambda: Vec<f64>,
    pub epsilon_scale: Vec<f64>,
    pub output_dir: PathBuf,
    pub max_parallel: usize,
    pub max_runs: usize,
    /// Re-run configurations whose directory already holds a result.
    pub force: bool,
}

impl CampaignSpec {
    pub fn new(base: RunConfig, output_dir: impl Into<PathBuf>) -> Self {
        CampaignSpec {
            base,
            alpha: Vec::new(),
            p: Vec::new(),
            lambda: Vec::new(),
            epsilon_scale: Vec::new(),
            output_dir: output_dir.into(),
            max_parallel: 1,
            max_runs: 512,
            force: false,
        }
    }

    /// Configurations of the sweep, in output order.
    pub fn expand(&self) -> Result<Vec<RunConfig>> {
        let or_base = |list: &Vec<f64>, base: f64| if list.is_empty() { vec![base] } else { list.clone() };
        let alphas = or_base(&self.alpha, self.base.alpha);
        let ps = or_base(&self.p, self.base.p);
        let lambdas = or_base(&self.lambda, self.base.lambda);
        let epss = or_base(&self.epsilon_scale, self.base.epsilon_scale);
        let size = alphas.len() * ps.len() * lambdas.len() * epss.len();
        if size > self.max_runs {
            return Err(invalid(format!("campaign has {size} runs, above the limit of {}", self.max_runs)));
        }
        let mut out = Vec::with_capacity(size);
        for &alpha in &alphas {
            for &p in &ps {
                for &lambda in &lambdas {
                    for &eps in &epss {
                        let mut cfg = self.base.clone();
                        for (key, value) in [("alpha", alpha), ("p", p), ("lambda", lambda), ("epsilon_scale", eps)] {
                            cfg.set(key, &value.to_string()).map_err(Error::InvalidParameter)?;
                        }
                        out.push(cfg);
                    }
                }
            }
        }
        Ok(out)
    }
}

fn parse_list(value: &str) -> std::result::Result<Vec<f64>, String> {
    value
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| format!("'{}' is not a number", v.trim())))
        .collect()
}

/// Parses a campaign file; sweep and scheduling lines are split off and the
/// remaining lines form the base run configuration.
pub fn parse_campaign(text: &str, output_dir: impl Into<PathBuf>) -> Result<CampaignSpec> {
    let mut base_lines = Vec::new();
    let mut sweeps: Vec<(String, Vec<f64>, usize)> = Vec::new();
    let mut max_parallel = None;
    let mut max_runs = None;
    for (i, line) in text.lines().enumerate() {
        let number = i + 1;
        let Some(Ok((key, value))) = split_line(line) else {
            base_lines.push((number, line));
            continue;
        };
        let err = |message: String| Error::Config { line: number, message };
        if let Some(name) = key.strip_prefix("sweep.") {
            if !["alpha", "p", "lambda", "epsilon_scale"].contains(&name) {
                return Err(err(format!("cannot sweep '{name}'")));
            }
            if sweeps.iter().any(|(n, _, _)| n == name) {
                return Err(err(format!("duplicate key '{key}'")));
            }
            let values = parse_list(value).map_err(err)?;
            let mut probe = RunConfig::default();
            for v in &values {
                probe.set(name, &v.to_string()).map_err(err)?;
            }
            sweeps.push((name.to_string(), values, number));
        } else if key == "max_parallel" || key == "max_runs" {
            let n: usize = value.parse().ok().filter(|&n| n > 0).ok_or_else(|| err(format!("{key} must be a positive integer")))?;
            let slot = if key == "max_parallel" { &mut max_parallel } else { &mut max_runs };
            if slot.replace(n).is_some() {
                return Err(err(format!("duplicate key '{key}'")));
            }
        } else {
            base_lines.push((number, line));
        }
    }
    let mut spec = CampaignSpec::new(parse_lines(base_lines.into_iter())?, output_dir);
    for (name, values, _) in sweeps {
        match name.as_str() {
            "alpha" => spec.alpha = values,
            "p" => spec.p = values,
            "lambda" => spec.lambda = values,
            _ => spec.epsilon_scale = values,
        }
    }
    spec.max_parallel = max_parallel.unwrap_or(1);
    spec.max_runs = max_runs.unwrap_or(512);
    Ok(spec)
}

/// Short stable identifier of a configuration.
pub fn config_hash(cfg: &RunConfig) -> String {
    let digest = Sha256::digest(cfg.to_text().as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// The per-run analysis written to `report.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub verdict: DichotomyVerdict,
    pub gap_q1_last: f64,
    pub gap_q2_last: f64,
}

impl ReportRow {
    pub fn to_csv(&self) -> String {
        let v = &self.verdict;
        format!(
            "{REPORT_HEADER}\n{},{},{},{},{},{},{}\n",
            v.regime,
            fmt_float(v.m_inf_estimate),
            fmt_float(v.evidence.plateau_rate),
            fmt_float(v.evidence.fit_window.0),
            fmt_float(v.evidence.fit_window.1),
            fmt_float(self.gap_q1_last),
            fmt_float(self.gap_q2_last)
        )
    }
}

/// Classification plus the scaled profile gaps of the final state.
pub fn analyse(result: &RunResult, alpha: f64) -> Result<ReportRow> {
    let state = &result.final_state;
    let last = (result.outcome == Outcome::Completed).then_some((state.time, &state.u));
    build_report(&result.trace, last, alpha)
}

/// Classifies `trace` and, when a final state is given, measures its scaled
/// profile gaps for `q = 1` and `q = 2`.
pub fn build_report(trace: &MassTrace, last: Option<(f64, &Field)>, alpha: f64) -> Result<ReportRow> {
    let verdict = estimate_mass_limit(trace);
    let gap = |q: f64| match last {
        Some((t, u)) if t > 0.0 && u.values().iter().all(|v| v.is_finite()) => {
            scaled_profile_gap(u, verdict.m_inf_estimate, t, q, alpha)
        }
        _ => Ok(f64::NAN),
    };
    Ok(ReportRow { gap_q1_last: gap(1.0)?, gap_q2_last: gap(2.0)?, verdict })
}

/// One line of `summary.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub alpha: f64,
    pub p: f64,
    pub lambda: f64,
    pub eps: f64,
    pub p_critical: f64,
    /// A [`Regime`] name, or `error`.
    pub regime: String,
    pub m_inf: f64,
    pub blowup_t: Option<f64>,
    /// An [`Outcome`] name, or `error`.
    pub outcome: String,
}

impl SummaryRow {
    fn for_config(cfg: &RunConfig) -> Self {
        SummaryRow {
            alpha: cfg.alpha,
            p: cfg.p,
            lambda: cfg.lambda,
            eps: cfg.epsilon_scale,
            p_critical: cfg.critical_exponent(),
            regime: "error".into(),
            m_inf: f64::NAN,
            blowup_t: None,
            outcome: "error".into(),
        }
    }

    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            fmt_float(self.alpha),
            fmt_float(self.p),
            fmt_float(self.lambda),
            fmt_float(self.eps),
            fmt_float(self.p_critical),
            self.regime,
            fmt_float(self.m_inf),
            fmt_optional(self.blowup_t),
            self.outcome
        )
    }

    pub fn parse_csv_line(line: &str) -> std::result::Result<Self, String> {
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 9 {
            return Err(format!("expected 9 columns, found {}", cols.len()));
        }
        let num = |i: usize| cols[i].parse::<f64>().map_err(|_| format!("column {} is not a number", i + 1));
        let blowup_t = if cols[7].is_empty() { None } else { Some(num(7)?) };
        let regime = cols[5].to_string();
        if regime != "error" {
            regime.parse::<Regime>().map_err(|e| e.to_string())?;
        }
        let outcome = cols[8].to_string();
        if outcome != "error" {
            outcome.parse::<Outcome>().map_err(|e| e.to_string())?;
        }
        Ok(SummaryRow {
            alpha: num(0)?,
            p: num(1)?,
            lambda: num(2)?,
            eps: num(3)?,
            p_critical: num(4)?,
            regime,
            m_inf: num(6)?,
            blowup_t,
            outcome,
        })
    }
}

/// Everything produced by executing one configuration.
pub struct RunOutput {
    pub result: RunResult,
    pub report: ReportRow,
    pub summary: SummaryRow,
}

pub fn execute(cfg: &RunConfig) -> Result<RunOutput> {
    let grid = cfg.grid()?;
    let u0 = cfg.initial_field(&grid)?;
    let result = run(&cfg.solver_config(), u0)?;
    let report = analyse(&result, cfg.alpha)?;
    let blown_up = result.outcome == Outcome::BlownUp;
    let summary = SummaryRow {
        regime: if blown_up { Regime::Inconclusive } else { report.verdict.regime }.to_string(),
        m_inf: if blown_up { f64::NAN } else { report.verdict.m_inf_estimate },
        blowup_t: result.blowup_time_estimate,
        outcome: result.outcome.to_string(),
        ..SummaryRow::for_config(cfg)
    };
    Ok(RunOutput { result, report, summary })
}

/// Writes `config.txt`, `trace.csv`, `report.csv` and `result.csv`; with
/// `snapshots` also `snap_<index>.lfk` for each stored snapshot and
/// `final.lfk`.
pub fn write_outputs(dir: &Path, cfg: &RunConfig, output: &RunOutput, snapshots: bool) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.txt"), cfg.to_text())?;
    write_trace(&dir.join("trace.csv"), &output.result.trace)?;
    fs::write(dir.join("report.csv"), output.report.to_csv())?;
    if snapshots {
        for (i, (t, field)) in output.result.snapshots.iter().enumerate() {
            write_snapshot(&dir.join(format!("snap_{i}.lfk")), *t, field)?;
        }
        let state = &output.result.final_state;
        write_snapshot(&dir.join("final.lfk"), state.time, &state.u)?;
    }
    fs::write(dir.join("result.csv"), format!("{SUMMARY_HEADER}\n{}\n", output.summary.to_csv_line()))?;
    Ok(())
}

fn read_result(dir: &Path) -> Option<SummaryRow> {
    let text = fs::read_to_string(dir.join("result.csv")).ok()?;
    let mut lines = text.lines();
    (lines.next()? == SUMMARY_HEADER).then_some(())?;
    SummaryRow::parse_csv_line(lines.next()?).ok()
}

fn run_one(cfg: &RunConfig, root: &Path, force: bool) -> SummaryRow {
    let dir = root.join(config_hash(cfg));
    if !force {
        if let Some(row) = read_result(&dir) {
            log::info!("skipping {} (result present)", dir.display());
            return row;
        }
    }
    let attempt = execute(cfg).and_then(|out| write_outputs(&dir, cfg, &out, false).map(|_| out.summary));
    attempt.unwrap_or_else(|e| {
        log::warn!("run in {} failed: {e}", dir.display());
        let row = SummaryRow::for_config(cfg);
        let _ = fs::create_dir_all(&dir).and_then(|_| {
            fs::write(dir.join("config.txt"), cfg.to_text())?;
            fs::write(dir.join("error.txt"), format!("{e}\n"))
        });
        row
    })
}

/// Executes every run of the sweep and writes `summary.csv`.
pub fn run_campaign(spec: &CampaignSpec) -> Result<Vec<SummaryRow>> {
    let configs = spec.expand()?;
    fs::create_dir_all(&spec.output_dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.max_parallel.max(1))
        .build()
        .map_err(|e| invalid(format!("cannot start worker pool: {e}")))?;
    let rows: Vec<SummaryRow> =
        pool.install(|| configs.par_iter().map(|cfg| run_one(cfg, &spec.output_dir, spec.force)).collect());
    let mut text = format!("{SUMMARY_HEADER}\n");
    for row in &rows {
        text.push_str(&row.to_csv_line());
        text.push('\n');
    }
    fs::write(spec.output_dir.join("summary.csv"), text)?;
    Ok(rows)
}

/// A row of [`summarize`]: parsed, or the raw text of a corrupt line.
#[derive(Clone, Debug, PartialEq)]
pub enum SummaryEntry {
    Row(SummaryRow),
    Corrupt { line: String, reason: String },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SummaryTable {
    pub entries: Vec<SummaryEntry>,
}

impl SummaryTable {
    pub fn rows(&self) -> impl Iterator<Item = &SummaryRow> {
        self.entries.iter().filter_map(|e| match e {
            SummaryEntry::Row(r) => Some(r),
            SummaryEntry::Corrupt { .. } => None,
        })
    }

    /// Text table grouped by the sign of `p - p_c`; corrupt rows are listed
    /// last and marked `error`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>8} {:>8} {:>7} {:>8} {:>8} {:>15} {:>12} {:>12} {:>15}",
            "alpha", "p", "lambda", "eps", "p_c", "regime", "M_inf", "blowup_T", "outcome"
        );
        type Group = (&'static str, fn(f64) -> bool);
        let groups: [Group; 3] = [
            ("p < p_c", |d| d < -1e-12),
            ("p = p_c", |d| d.abs() <= 1e-12),
            ("p > p_c", |d| d > 1e-12),
        ];
        for (title, member) in groups {
            let rows: Vec<&SummaryRow> = self.rows().filter(|r| member(r.p - r.p_critical)).collect();
            if rows.is_empty() {
                continue;
            }
            let _ = writeln!(out, "# {title}");
            for r in rows {
                let _ = writeln!(
                    out,
                    "{:>8.4} {:>8.4} {:>7} {:>8.4} {:>8.4} {:>15} {:>12.5e} {:>12} {:>15}",
                    r.alpha,
                    r.p,
                    r.lambda,
                    r.eps,
                    r.p_critical,
                    r.regime,
                    r.m_inf,
                    r.blowup_t.map_or_else(|| "-".to_string(), |t| format!("{t:.5e}")),
                    r.outcome
                );
            }
        }
        let corrupt: Vec<_> = self
            .entries
            .iter()
            .filter_map(|e| match e {
                SummaryEntry::Corrupt { line, reason } => Some((line, reason)),
                SummaryEntry::Row(_) => None,
            })
            .collect();
        if !corrupt.is_empty() {
            let _ = writeln!(out, "# unreadable rows");
            for (line, reason) in corrupt {
                let _ = writeln!(out, "error  {line}  ({reason})");
            }
        }
        out
    }
}

fn parse_summary_lines<'a>(lines: impl Iterator<Item = &'a str>, table: &mut SummaryTable) {
    for line in lines.filter(|l| !l.trim().is_empty()) {
        table.entries.push(match SummaryRow::parse_csv_line(line) {
            Ok(row) => SummaryEntry::Row(row),
            Err(reason) => SummaryEntry::Corrupt { line: line.to_string(), reason },
        });
    }
}

/// Reads `summary.csv` from `dir`, or the per-run `result.csv` files when no
/// summary exists yet.
pub fn summarize(dir: &Path) -> Result<SummaryTable> {
    let mut table = SummaryTable::default();
    let summary = dir.join("summary.csv");
    if summary.exists() {
        let text = fs::read_to_string(summary)?;
        let mut lines = text.lines();
        if let Some(header) = lines.next() {
            if header.trim() == SUMMARY_HEADER {
                parse_summary_lines(lines, &mut table);
            } else {
                parse_summary_lines(std::iter::once(header).chain(lines), &mut table);
            }
        }
        return Ok(table);
    }
    if !dir.exists() {
        return Err(Error::Io(std::io::Error::new(std::io::ErrorKind::NotFound, format!("{} not found", dir.display()))));
    }
    let mut run_dirs: Vec<PathBuf> = fs::read_dir(dir)?.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.is_dir()).collect();
    run_dirs.sort();
    for d in run_dirs {
        if let Ok(text) = fs::read_to_string(d.join("result.csv")) {
            parse_summary_lines(text.lines().skip(1), &mut table);
        }
    }
    Ok(table)
}
