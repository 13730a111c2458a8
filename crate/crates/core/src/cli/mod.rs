//! The `kw` command-line runner.
//!
//! Every command reads a JSON [`config::RunConfig`], prints a machine-readable
//! report on stdout and exits with one of the codes in [`exit`].

pub mod config;
pub mod expr;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use self::config::{Method, RunConfig};
use crate::elliptic::{build_upper_lower, cross_validate, monotone_solve_with, newton_solve_with};
use crate::error::{KwError, Result};
use crate::estimates::verify_solution_bounds;
use crate::flow::{barrier_data, run_flow_observed, BarrierMonitor, BARRIER_SLACK};
use crate::manifold::{integrate, read_field_dump, write_field_dump, Grid, ScalarField};
use crate::problem::{self, residual, HypothesisMode, ProblemData};

pub mod exit {
    pub const SUCCESS: u8 = 0;
    pub const HYPOTHESIS: u8 = 1;
    pub const INPUT: u8 = 2;
    pub const NO_CONVERGENCE: u8 = 3;
    pub const VERIFICATION: u8 = 4;
}

/// Observed refinement order accepted by `mms`.
pub const MMS_ORDER_RANGE: (f64, f64) = (1.8, 2.2);

/// Errors below this on every grid mean the discrete solution reproduces the
/// exact one and no order is reported.
const MMS_EXACT_TOL: f64 = 1e-8;

#[derive(Debug, Parser)]
#[command(
    name = "kw",
    version,
    about = "Solve and verify generalized Kazdan-Warner problems on flat tori"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the hypotheses on S, A, B and θ.
    Validate(CommonArgs),
    /// Run the configured solver and dump the solution.
    Solve(CommonArgs),
    /// Grid-refinement study against the closed-form `exact` solution.
    Mms(CommonArgs),
    /// Check a solution against the a-priori bounds.
    Bounds {
        #[command(flatten)]
        common: CommonArgs,
        /// Field dump of the solution to check.
        #[arg(long)]
        solution: Option<PathBuf>,
    },
    /// Solve with flow, Newton and the monotone scheme and compare.
    CrossValidate(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn exit_code(err: &KwError) -> u8 {
    match err {
        KwError::Hypothesis(_) => exit::HYPOTHESIS,
        KwError::InvalidGrid(_)
        | KwError::GridMismatch { .. }
        | KwError::InvalidArgument(_)
        | KwError::Parse(_)
        | KwError::Io(_) => exit::INPUT,
        KwError::NoConvergence { .. }
        | KwError::Overflow { .. }
        | KwError::NonFinite(_)
        | KwError::IncompatibleRhs { .. } => exit::NO_CONVERGENCE,
        KwError::MonotonicityViolation { .. } | KwError::BarrierCheck(_) => exit::VERIFICATION,
    }
}

/// Runs one command, printing reports to `stdout` and errors to stderr.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> u8 {
    let result = match &cli.command {
        Command::Validate(args) => cmd_validate(args, stdout),
        Command::Solve(args) => cmd_solve(args, stdout),
        Command::Mms(args) => cmd_mms(args, stdout),
        Command::Bounds { common, solution } => cmd_bounds(common, solution.as_deref(), stdout),
        Command::CrossValidate(args) => cmd_cross_validate(args, stdout),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        exit_code(&e)
    })
}

struct Loaded {
    config: RunConfig,
    grid: Grid,
    problem: ProblemData,
}

fn load(args: &CommonArgs) -> Result<Loaded> {
    let config = RunConfig::load(&args.config)?;
    let grid = config.build_grid()?;
    let problem = config.build_problem(&grid)?;
    Ok(Loaded {
        config,
        grid,
        problem,
    })
}

fn out_dir(args: &CommonArgs) -> Result<Option<PathBuf>> {
    match &args.out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| KwError::Io(format!("{}: {e}", dir.display())))?;
            Ok(Some(dir.clone()))
        }
        None => Ok(None),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| KwError::Io(format!("{}: {e}", path.display())))
}

fn emit(stdout: &mut dyn Write, report: &Value, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(report).map_err(|e| KwError::Io(e.to_string()))?;
    writeln!(stdout, "{text}")?;
    if let Some(dir) = out {
        write_text(&dir.join("report.json"), &text)?;
    }
    Ok(())
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn cmd_validate(args: &CommonArgs, stdout: &mut dyn Write) -> Result<u8> {
    let Loaded { problem, .. } = load(args)?;
    let weak = problem::validate(&problem, HypothesisMode::Weak);
    let strict = problem::validate(&problem, HypothesisMode::Strict);
    let report =
        json!({ "passed": weak.passed, "weak": to_value(&weak), "strict": to_value(&strict) });
    emit(stdout, &report, out_dir(args)?.as_deref())?;
    for c in weak.failures() {
        eprintln!(
            "hypothesis failed: {}",
            c.reason.as_deref().unwrap_or(c.name)
        );
    }
    Ok(if weak.passed {
        exit::SUCCESS
    } else {
        exit::HYPOTHESIS
    })
}

struct Solved {
    u: ScalarField,
    converged: bool,
    report: Value,
    trace_csv: Option<String>,
}

fn solve_with(
    method: Method,
    config: &RunConfig,
    problem: &ProblemData,
    u0: &ScalarField,
) -> Result<Solved> {
    let solver = &config.solver;
    match method {
        Method::Flow => {
            let mut monitor = BarrierMonitor::new(barrier_data(problem, u0)?, BARRIER_SLACK);
            let out = run_flow_observed(u0, problem, &solver.flow()?, &mut monitor)?;
            let report = json!({
                "method": "flow",
                "converged": out.converged,
                "steps": out.steps,
                "dt": out.dt,
                "time": out.steps as f64 * out.dt,
                "final_residual": out.final_residual,
                "worst_sup_ut_increase": out.trace.worst_sup_ut_increase(),
                "worst_energy_increase": out.trace.worst_energy_increase(),
                "barrier": to_value(&monitor.report()?),
            });
            Ok(Solved {
                converged: out.converged,
                trace_csv: Some(out.trace.to_csv()),
                u: out.u,
                report,
            })
        }
        Method::Newton => {
            let out = newton_solve_with(problem, u0, &solver.newton())?;
            let mut report = to_value(&out);
            report["method"] = json!("newton");
            Ok(Solved {
                converged: out.converged,
                u: out.u,
                report,
                trace_csv: None,
            })
        }
        Method::Monotone => {
            let ul = build_upper_lower(problem, &solver.upper_lower())?;
            let out = monotone_solve_with(problem, &ul, &solver.monotone())?;
            let mut report = to_value(&out);
            report["method"] = json!("monotone");
            report["upper_lower"] = to_value(&ul);
            Ok(Solved {
                converged: out.converged,
                u: out.u,
                report,
                trace_csv: None,
            })
        }
    }
}

fn cmd_solve(args: &CommonArgs, stdout: &mut dyn Write) -> Result<u8> {
    let Loaded {
        config,
        grid,
        problem,
    } = load(args)?;
    problem::require(&problem, HypothesisMode::Weak)?;
    let u0 = config.initial(&grid)?;
    let solved = solve_with(config.solver.method, &config, &problem, &u0)?;
    let dir = out_dir(args)?.unwrap_or_else(|| PathBuf::from("."));
    write_field_dump(&dir.join("solution.txt"), &grid, &solved.u)?;
    if let Some(csv) = &solved.trace_csv {
        write_text(&dir.join("trace.csv"), csv)?;
    }
    let mut report = solved.report;
    report["min_u"] = json!(solved.u.min());
    report["max_u"] = json!(solved.u.max());
    emit(stdout, &report, Some(&dir))?;
    Ok(if solved.converged {
        exit::SUCCESS
    } else {
        exit::NO_CONVERGENCE
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmsRow {
    pub n: usize,
    pub sup_error: f64,
    pub observed_order: Option<f64>,
}

fn mms_level(config: &RunConfig, n: usize) -> Result<f64> {
    let config = config.refined(n);
    let grid = config.build_grid()?;
    let problem = config.build_problem(&grid)?;
    let (_, exact) = config
        .exact(&grid)?
        .ok_or_else(|| KwError::InvalidArgument("mms needs an \"exact\" expression".into()))?;
    let s_bar = integrate(&grid, problem.s())?;
    if !(s_bar < 0.0) {
        return Err(KwError::InvalidArgument(format!(
            "manufactured S has integral {s_bar:e} >= 0 on the {n}-point grid; rescale the exact solution or enlarge A"
        )));
    }
    problem::require(&problem, HypothesisMode::Weak)?;
    let u0 = config.initial(&grid)?;
    let solved = solve_with(config.solver.method, &config, &problem, &u0)?;
    if !solved.converged {
        return Err(KwError::NoConvergence {
            solver: "mms solve",
            iterations: 0,
            residual: residual(&problem, &solved.u)?.sup_norm(),
        });
    }
    solved.u.sup_distance(&exact)
}

fn mms_rows(sizes: &[usize], errors: &[f64]) -> Vec<MmsRow> {
    let mut rows: Vec<MmsRow> = Vec::with_capacity(sizes.len());
    for (i, (&n, &e)) in sizes.iter().zip(errors).enumerate() {
        let observed_order =
            (i > 0).then(|| (errors[i - 1] / e).ln() / (n as f64 / sizes[i - 1] as f64).ln());
        rows.push(MmsRow {
            n,
            sup_error: e,
            observed_order,
        });
    }
    rows
}

fn cmd_mms(args: &CommonArgs, stdout: &mut dyn Write) -> Result<u8> {
    let config = RunConfig::load(&args.config)?;
    if config.exact.is_none() {
        return Err(KwError::InvalidArgument(
            "mms needs an \"exact\" expression".into(),
        ));
    }
    let mut sizes = config.mms.sizes.clone();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() < 2 {
        return Err(KwError::InvalidArgument(
            "mms needs at least two grid sizes".into(),
        ));
    }
    let errors = std::thread::scope(|scope| {
        let config = &config;
        let handles: Vec<_> = sizes
            .iter()
            .map(|&n| scope.spawn(move || mms_level(config, n)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("mms worker panicked"))
            .collect::<Result<Vec<f64>>>()
    })?;
    let rows = mms_rows(&sizes, &errors);
    let exact = errors.iter().all(|&e| e <= MMS_EXACT_TOL);

    let mut csv = String::from("N,sup_error,observed_order\n");
    for r in &rows {
        let order = match (exact, r.observed_order) {
            (true, _) => "exact".to_string(),
            (false, Some(o)) => format!("{o:.6}"),
            (false, None) => String::new(),
        };
        csv.push_str(&format!("{},{:.16e},{}\n", r.n, r.sup_error, order));
    }
    write!(stdout, "{csv}")?;
    let dir = out_dir(args)?.unwrap_or_else(|| PathBuf::from("."));
    write_text(&dir.join("mms.csv"), &csv)?;

    if exact {
        return Ok(exit::SUCCESS);
    }
    let finest = rows
        .last()
        .and_then(|r| r.observed_order)
        .unwrap_or(f64::NAN);
    let (lo, hi) = MMS_ORDER_RANGE;
    if (lo..=hi).contains(&finest) {
        Ok(exit::SUCCESS)
    } else {
        eprintln!("observed order {finest:.4} outside [{lo}, {hi}]");
        Ok(exit::VERIFICATION)
    }
}

fn cmd_bounds(args: &CommonArgs, solution: Option<&Path>, stdout: &mut dyn Write) -> Result<u8> {
    let Loaded { grid, problem, .. } = load(args)?;
    let path = solution
        .ok_or_else(|| KwError::InvalidArgument("bounds needs --solution <path>".into()))?;
    let u = read_field_dump(path)?.into_field(&grid)?;
    problem::require(&problem, HypothesisMode::Weak)?;
    let report = verify_solution_bounds(&problem, &u)?;
    for notice in &report.notices {
        eprintln!("notice: {notice}");
    }
    let mut value = to_value(&report);
    value["residual"] = json!(residual(&problem, &u)?.sup_norm());
    emit(stdout, &value, out_dir(args)?.as_deref())?;
    Ok(if report.passed {
        exit::SUCCESS
    } else {
        exit::VERIFICATION
    })
}

fn cmd_cross_validate(args: &CommonArgs, stdout: &mut dyn Write) -> Result<u8> {
    let Loaded {
        config,
        grid,
        problem,
    } = load(args)?;
    problem::require(&problem, HypothesisMode::Weak)?;
    let u0 = config.initial(&grid)?;
    let methods = [
        (Method::Flow, "flow"),
        (Method::Newton, "newton"),
        (Method::Monotone, "monotone"),
    ];
    let solved = std::thread::scope(|scope| {
        let handles: Vec<_> = methods
            .iter()
            .map(|&(m, _)| {
                let (config, problem, u0) = (&config, &problem, &u0);
                scope.spawn(move || solve_with(m, config, problem, u0))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("solver thread panicked"))
            .collect::<Result<Vec<_>>>()
    })?;

    let named: Vec<(&str, &ScalarField)> = methods
        .iter()
        .zip(&solved)
        .map(|((_, name), s)| (*name, &s.u))
        .collect();
    let cross = cross_validate(&problem, &named, config.cross_tol)?;
    let all_converged = solved.iter().all(|s| s.converged);
    let runs: serde_json::Map<String, Value> = methods
        .iter()
        .zip(&solved)
        .map(|((_, name), s)| (name.to_string(), s.report.clone()))
        .collect();
    let report =
        json!({ "passed": cross.passed && all_converged, "cross": to_value(&cross), "runs": runs });
    let dir = out_dir(args)?;
    if let Some(d) = &dir {
        for ((_, name), s) in methods.iter().zip(&solved) {
            write_field_dump(&d.join(format!("solution_{name}.txt")), &grid, &s.u)?;
        }
    }
    emit(stdout, &report, dir.as_deref())?;
    if !all_converged {
        return Ok(exit::NO_CONVERGENCE);
    }
    Ok(if cross.passed {
        exit::SUCCESS
    } else {
        exit::VERIFICATION
    })
}
