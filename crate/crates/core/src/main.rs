use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use levy_fujita::asymptotics::critical_exponent;
use levy_fujita::campaign::{build_report, execute, parse_campaign, run_campaign, summarize, write_outputs};
use levy_fujita::config::parse_config;
use levy_fujita::error::{Error, Result};
use levy_fujita::io::{fmt_float, read_snapshot, read_trace, write_snapshot};
use levy_fujita::kernel::{kernel_grid, kernel_value, KernelSpec};
use levy_fujita::solver::{run, SolverConfig};
use levy_fujita::spectral::{Field, Grid};
use levy_fujita::testfn::{budget_snapshot_times, critical_budget, scaling_law_fit, TestFunctionConfig};

#[derive(Parser)]
#[command(name = "levy-fujita", version, about = "Fractional Fujita-type equations on the periodic torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the stable kernel at a point, or sample it on a grid.
    Kernel(KernelArgs),
    /// Run one configuration and write its trace and snapshots.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a parameter sweep.
    Campaign {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Re-run configurations that already have results.
        #[arg(long)]
        force: bool,
    },
    /// Test-function scaling law and critical-case budget.
    Testfn(TestfnArgs),
    /// Classify the run stored in a directory written by `simulate`.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,2")]
        q: Vec<f64>,
    },
    /// Print the dichotomy table of a campaign directory.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

#[derive(Args)]
struct KernelArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[arg(long)]
    t: f64,
    /// Evaluation point, one coordinate per dimension.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required_unless_present = "grid")]
    x: Vec<f64>,
    /// Sample on an `n^dim` grid instead and write an LFK1 file.
    #[arg(long, requires = "out")]
    grid: bool,
    #[arg(long, default_value_t = 256)]
    n: usize,
    #[arg(long, default_value_t = 64.0)]
    length: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TestfnArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    p: f64,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[arg(long = "R-list", value_delimiter = ',', required = true)]
    r_list: Vec<f64>,
    #[arg(long = "B-list", value_delimiter = ',')]
    b_list: Vec<f64>,
    /// Radius used for the budget table.
    #[arg(long = "budget-R", default_value_t = 2.0)]
    budget_r: f64,
    /// Young parameter of the budget; defaults to 1/(2 ell).
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Some(threads) = std::env::var("LEVY_FUJITA_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    match dispatch(Cli::parse().command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: Command) -> Result<u8> {
    match command {
        Command::Kernel(args) => kernel(args),
        Command::Simulate { config, out } => simulate(&config, &out),
        Command::Campaign { spec, out, force } => {
            let mut spec = parse_campaign(&fs::read_to_string(spec)?, out)?;
            spec.force = force;
            let rows = run_campaign(&spec)?;
            let failed = rows.iter().filter(|r| r.outcome == "error").count();
            println!("{} runs written to {} ({failed} failed)", rows.len(), spec.output_dir.display());
            Ok(0)
        }
        Command::Testfn(args) => testfn(args),
        Command::Report { input, q } => report(&input, &q),
        Command::Summarize { input } => {
            print!("{}", summarize(&input)?.render());
            Ok(0)
        }
    }
}

fn kernel(args: KernelArgs) -> Result<u8> {
    let spec = KernelSpec::new(args.alpha, args.dim)?;
    if args.grid {
        let grid = Grid::new(args.dim, args.n, args.length)?;
        let field = kernel_grid(&spec, &grid, args.t)?;
        let out = args.out.expect("clap enforces --out");
        write_snapshot(&out, args.t, &field)?;
        println!("wrote {}", out.display());
    } else {
        if args.x.len() != args.dim {
            return Err(Error::InvalidParameter(format!("--x needs {} coordinates", args.dim)));
        }
        println!("{}", fmt_float(kernel_value(&spec, &args.x, args.t)?));
    }
    Ok(0)
}

fn simulate(config: &Path, out: &Path) -> Result<u8> {
    let cfg = parse_config(&fs::read_to_string(config)?)?;
    let output = execute(&cfg)?;
    write_outputs(out, &cfg, &output, true)?;
    let result = &output.result;
    println!(
        "outcome={} t={} steps={} mass={}",
        result.outcome,
        fmt_float(result.final_state.time),
        result.steps,
        result.trace.last().map_or_else(|| "nan".into(), |e| fmt_float(e.mass))
    );
    if let Some(t) = result.blowup_time_estimate {
        println!("blowup_T={}", fmt_float(t));
    }
    for d in &result.diagnostics {
        log::info!("{d}");
    }
    Ok(result.outcome.exit_code() as u8)
}

fn report(dir: &Path, qs: &[f64]) -> Result<u8> {
    let trace = read_trace(&dir.join("trace.csv"))?;
    let alpha = match fs::read_to_string(dir.join("config.txt")) {
        Ok(text) => parse_config(&text)?.alpha,
        Err(_) => return Err(Error::InvalidParameter(format!("{} has no config.txt", dir.display()))),
    };
    let last = match read_snapshot(&dir.join("final.lfk")) {
        Ok(snapshot) => Some(snapshot),
        Err(e) => {
            log::warn!("no usable final.lfk: {e}");
            None
        }
    };
    let row = build_report(&trace, last.as_ref().map(|(t, u)| (*t, u)), alpha)?;
    fs::write(dir.join("report.csv"), row.to_csv())?;
    let v = &row.verdict;
    println!("{:<24} {}", "regime", v.regime);
    println!("{:<24} {}", "M_inf", fmt_float(v.m_inf_estimate));
    println!("{:<24} {}", "plateau_rate", fmt_float(v.evidence.plateau_rate));
    println!("{:<24} [{}, {}]", "fit_window", fmt_float(v.evidence.fit_window.0), fmt_float(v.evidence.fit_window.1));
    if let Some(m) = v.evidence.extrapolated_limit {
        println!("{:<24} {}", "extrapolated_limit", fmt_float(m));
    }
    if let Some((t, u)) = &last {
        for &q in qs {
            let gap = levy_fujita::asymptotics::scaled_profile_gap(u, v.m_inf_estimate, *t, q, alpha)?;
            println!("{:<24} {}", format!("gap_q{q}_last"), fmt_float(gap));
        }
    }
    if let Some(d) = &v.evidence.diagnostic {
        println!("{:<24} {d}", "diagnostic");
    }
    Ok(0)
}

fn testfn(args: TestfnArgs) -> Result<u8> {
    fs::create_dir_all(&args.out)?;
    let cfg = TestFunctionConfig::new(args.alpha, args.p, 1.0, 1.0, args.dim)?;
    let fit = scaling_law_fit(&cfg, &args.r_list)?;
    let mut scaling = String::from("R,integral_space_term,integral_time_term,total\n");
    for row in &fit.rows {
        scaling.push_str(&format!(
            "{},{},{},{}\n",
            fmt_float(row.r),
            fmt_float(row.space_term),
            fmt_float(row.time_term),
            fmt_float(row.total)
        ));
    }
    fs::write(args.out.join("scaling.csv"), scaling)?;
    println!("fitted_exponent={} theory={}", fmt_float(fit.fitted_exponent), fmt_float(fit.theory));

    if args.b_list.is_empty() {
        return Ok(0);
    }
    let critical = critical_exponent(args.alpha, args.dim);
    if (args.p - critical).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!("--B-list needs the critical exponent p = {critical}")));
    }
    let cfg = cfg.with_r(args.budget_r)?;
    let eps = args.eps.unwrap_or(1.0 / (2.0 * cfg.ell));
    let b_max = args.b_list.iter().cloned().fold(1.0, f64::max);
    let length = (8.0 * b_max * cfg.r).max(64.0).log2().ceil().exp2();
    let spacing = if args.dim == 1 { 0.125 } else { 0.5 };
    let n = ((length / spacing) as usize).next_power_of_two();
    let grid = Grid::new(args.dim, n, length)?;
    let u0 = Field::from_fn(grid, |x| (-x.iter().map(|v| v * v).sum::<f64>() / 2.0).exp());
    let mut solver = SolverConfig::new(args.alpha, args.p, -1.0);
    solver.t_end = cfg.horizon();
    solver.dt_max = 0.05;
    solver.snapshot_times = budget_snapshot_times(&cfg);
    let result = run(&solver, u0)?;
    let rows = critical_budget(&result, &cfg, eps, &args.b_list)?;
    let mut budget = String::from("B,lhs,rhs_term1,rhs_term2\n");
    for row in &rows {
        budget.push_str(&format!(
            "{},{},{},{}\n",
            fmt_float(row.b),
            fmt_float(row.lhs),
            fmt_float(row.rhs_term1),
            fmt_float(row.rhs_term2)
        ));
    }
    fs::write(args.out.join("budget.csv"), budget)?;
    Ok(0)
}
