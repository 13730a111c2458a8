//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::f64::consts::{E, PI};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use kw_core::cli::config::manufactured_source;
use kw_core::cli::expr::Expr;
use kw_core::elliptic::{
    build_upper_lower, cross_validate, monotone_solve_with, newton_solve_with, MonotoneOptions,
    MonotoneOutcome, NewtonOptions, UpperLowerData, UpperLowerParams,
};
use kw_core::estimates::verify_solution_bounds;
use kw_core::flow::{
    barrier_data, comparison_ode_solve, fit_decay_rate, run_flow_observed, BarrierMonitor,
    BarrierReport, FlowConfig, FlowTrace, BARRIER_SLACK, MONOTONE_SLACK,
};
use kw_core::manifold::{drift_term, integrate, laplacian, DriftForm, Grid, GridSpec, ScalarField};
use kw_core::problem::ProblemData;

type Outcome = Result<String, String>;

const CROSS_TOL: f64 = 1e-6;
const FLOW_TOL: f64 = 1e-6;
const NEWTON_EXACT_TOL: f64 = 1e-10;
const ORDER_RANGE: (f64, f64) = (1.8, 2.2);
const DECAY_SLACK: f64 = 0.1;
const RK4_TOL: f64 = 1e-8;
const BOUND_SLACK: f64 = 1e-6;
const ATTAINED_TOL: f64 = 1e-8;
const SIGN_MARGIN: f64 = 1e-8;
const DRIFT_TOL: f64 = 1e-10;
const IDENTITY_TOL: f64 = 1e-12;

fn golden() -> f64 {
    ((1.0 + 5f64.sqrt()) / 2.0).ln()
}

fn grid2(n: usize) -> Grid {
    Grid::new(GridSpec::uniform(2, n)).unwrap()
}

fn flow_config() -> FlowConfig {
    FlowConfig {
        residual_tol: 1e-10,
        max_time: 400.0,
        trace_stride: 2,
        ..FlowConfig::default()
    }
}

struct FlowRun {
    label: String,
    u: ScalarField,
    trace: FlowTrace,
    converged: bool,
    barrier: BarrierReport,
}

fn flow(label: &str, problem: &ProblemData, u0: &ScalarField) -> Result<FlowRun, String> {
    let mut monitor = BarrierMonitor::new(
        barrier_data(problem, u0).map_err(|e| e.to_string())?,
        BARRIER_SLACK,
    );
    let out =
        run_flow_observed(u0, problem, &flow_config(), &mut monitor).map_err(|e| e.to_string())?;
    Ok(FlowRun {
        label: label.to_string(),
        u: out.u,
        trace: out.trace,
        converged: out.converged,
        barrier: monitor.report().map_err(|e| e.to_string())?,
    })
}

fn newton(problem: &ProblemData) -> Result<ScalarField, String> {
    let options = NewtonOptions {
        tol: 1e-11,
        max_iter: 50,
        ..NewtonOptions::default()
    };
    let out = newton_solve_with(problem, &ScalarField::zeros(problem.grid()), &options)
        .map_err(|e| e.to_string())?;
    if !out.converged {
        return Err(format!(
            "newton stopped at residual {:e}",
            out.final_residual()
        ));
    }
    Ok(out.u)
}

fn monotone(problem: &ProblemData) -> Result<(UpperLowerData, MonotoneOutcome), String> {
    let ul = build_upper_lower(problem, &UpperLowerParams::default()).map_err(|e| e.to_string())?;
    let options = MonotoneOptions {
        tol: 1e-12,
        ..MonotoneOptions::default()
    };
    let out = monotone_solve_with(problem, &ul, &options).map_err(|e| e.to_string())?;
    if !out.converged {
        return Err(format!("monotone stopped at step {:e}", out.final_step));
    }
    Ok((ul, out))
}

/// The three solver results for one problem, plus a second flow.
struct Solved {
    name: &'static str,
    problem: ProblemData,
    flow: FlowRun,
    flow_alt: Option<FlowRun>,
    newton: ScalarField,
    monotone: (UpperLowerData, MonotoneOutcome),
}

fn solve_all(
    name: &'static str,
    problem: ProblemData,
    alt_start: Option<ScalarField>,
) -> Result<Solved, String> {
    let u0 = ScalarField::zeros(problem.grid());
    let flow_main = flow(&format!("{name} from 0"), &problem, &u0)?;
    let flow_alt = match alt_start {
        Some(start) => Some(flow(&format!("{name} from 3 sin(2πx)"), &problem, &start)?),
        None => None,
    };
    let newton = newton(&problem)?;
    let monotone = monotone(&problem)?;
    Ok(Solved {
        name,
        problem,
        flow: flow_main,
        flow_alt,
        newton,
        monotone,
    })
}

fn constant_problem(s: f64, b: f64) -> ProblemData {
    ProblemData::constant(&grid2(64), s, 1.0, b, 1.0, 1.0).unwrap()
}

const MMS_EXACT: &str = "0.5*sin(2*pi*x)*cos(2*pi*y)";

fn mms_problem(n: usize) -> ProblemData {
    let g = grid2(n);
    let a = ScalarField::from_fn(&g, |x| 2.0 + (2.0 * PI * x[0]).cos());
    let b = ScalarField::from_fn(&g, |x| 1.0 + 0.5 * (2.0 * PI * x[1]).sin());
    let theta = DriftForm::constant(&g, &[0.3, -0.2]).unwrap();
    let exact = Expr::parse(MMS_EXACT).unwrap();
    let s = manufactured_source(&g, &exact, &a, &b, 1.5, 0.7, &theta).unwrap();
    ProblemData::new(g, s, a, b, 1.5, 0.7, theta).unwrap()
}

fn mms_exact(grid: &Grid) -> ScalarField {
    ScalarField::from_fn(grid, |x| {
        0.5 * (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos()
    })
}

struct Lab {
    p1: Solved,
    p2: Solved,
    p3: Solved,
}

impl Lab {
    fn all(&self) -> [&Solved; 3] {
        [&self.p1, &self.p2, &self.p3]
    }

    fn flows(&self) -> impl Iterator<Item = (&Solved, &FlowRun)> {
        self.all().into_iter().flat_map(|s| {
            std::iter::once(&s.flow)
                .chain(s.flow_alt.as_ref())
                .map(move |f| (s, f))
        })
    }
}

fn build_lab() -> Result<Lab, String> {
    let start = |g: &Grid| ScalarField::from_fn(g, |x| 3.0 * (2.0 * PI * x[0]).sin());
    let p2 = constant_problem(-1.0, 1.0);
    let p3 = mms_problem(64);
    let (s2, s3) = (start(p2.grid()), start(p3.grid()));
    Ok(Lab {
        p1: solve_all("S=-e", constant_problem(-E, 0.0), None)?,
        p2: solve_all("golden", p2, Some(s2))?,
        p3: solve_all("manufactured", p3, Some(s3))?,
    })
}

fn sup_err(u: &ScalarField, value: f64) -> f64 {
    u.values()
        .iter()
        .map(|v| (v - value).abs())
        .fold(0.0, f64::max)
}

fn c1_exact_constant(lab: &Lab) -> Outcome {
    let p = &lab.p1;
    let (f, n, m) = (
        sup_err(&p.flow.u, 1.0),
        sup_err(&p.newton, 1.0),
        sup_err(&p.monotone.1.u, 1.0),
    );
    let detail = format!("u ≡ 1 on 64²: flow {f:.2e}, newton {n:.2e}, monotone {m:.2e}");
    if f <= FLOW_TOL && m <= FLOW_TOL && n <= NEWTON_EXACT_TOL {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c2_golden(lab: &Lab) -> Outcome {
    let p = &lab.p2;
    let g = golden();
    let errs = [
        sup_err(&p.flow.u, g),
        sup_err(&p.newton, g),
        sup_err(&p.monotone.1.u, g),
    ];
    let detail = format!(
        "u ≡ {g:.7}: flow {:.2e}, newton {:.2e}, monotone {:.2e}",
        errs[0], errs[1], errs[2]
    );
    if errs.iter().all(|&e| e <= FLOW_TOL) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c3_mms(lab: &Lab) -> Outcome {
    let mut errors = Vec::new();
    for n in [16, 32] {
        let p = mms_problem(n);
        errors.push(newton(&p)?.sup_distance(&mms_exact(p.grid())).unwrap());
    }
    errors.push(
        lab.p3
            .newton
            .sup_distance(&mms_exact(lab.p3.problem.grid()))
            .unwrap(),
    );
    let orders = [
        (errors[0] / errors[1]).log2(),
        (errors[1] / errors[2]).log2(),
    ];
    let flow_vs_newton = lab.p3.flow.u.sup_distance(&lab.p3.newton).unwrap();
    let detail = format!(
        "errors {:.3e}/{:.3e}/{:.3e}, orders {:.3}/{:.3}, flow vs newton at 64² {flow_vs_newton:.2e}",
        errors[0], errors[1], errors[2], orders[0], orders[1]
    );
    let in_range = orders
        .iter()
        .all(|o| (ORDER_RANGE.0..=ORDER_RANGE.1).contains(o));
    if in_range && flow_vs_newton <= CROSS_TOL {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c4_uniqueness(lab: &Lab) -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for s in [&lab.p2, &lab.p3] {
        let alt = s.flow_alt.as_ref().expect("second flow");
        let starts = s.flow.u.sup_distance(&alt.u).unwrap();
        let cross = cross_validate(
            &s.problem,
            &[
                ("flow", &s.flow.u),
                ("newton", &s.newton),
                ("monotone", &s.monotone.1.u),
            ],
            CROSS_TOL,
        )
        .map_err(|e| e.to_string())?;
        ok &= starts <= CROSS_TOL && cross.passed && s.flow.converged && alt.converged;
        parts.push(format!(
            "{}: starts {starts:.2e}, methods {:.2e}",
            s.name, cross.max_difference
        ));
    }
    if ok {
        Ok(parts.join("; "))
    } else {
        Err(parts.join("; "))
    }
}

fn c5_flow_monotone(lab: &Lab) -> Outcome {
    let mut worst_ut = f64::NEG_INFINITY;
    let mut worst_energy = f64::NEG_INFINITY;
    let mut runs = 0;
    let mut energy_runs = 0;
    for (_, f) in lab.flows().filter(|(_, f)| f.converged) {
        runs += 1;
        worst_ut = worst_ut.max(f.trace.worst_sup_ut_increase());
        if let Some(e) = f.trace.worst_energy_increase() {
            energy_runs += 1;
            worst_energy = worst_energy.max(e);
        }
    }
    let detail = format!(
        "{runs} runs, worst sup|u_t| increase {worst_ut:.2e}; {energy_runs} θ≡0 runs, worst energy increase \
         {worst_energy:.2e} (beyond slack {MONOTONE_SLACK:e}·(1+v))"
    );
    if runs == lab.flows().count() && energy_runs >= 3 && worst_ut <= 0.0 && worst_energy <= 0.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c6_decay(lab: &Lab) -> Outcome {
    let s = &lab.p3;
    let trace = &s.flow.trace;
    let start = trace
        .times
        .iter()
        .zip(&trace.sup_ut)
        .find(|(_, &v)| v <= 1e-2)
        .map(|(&t, _)| t)
        .ok_or("no tail")?;
    let end = trace
        .times
        .iter()
        .zip(&trace.sup_ut)
        .filter(|(_, &v)| v >= 1e-8)
        .map(|(&t, _)| t)
        .next_back()
        .ok_or("no tail")?;
    let rate = fit_decay_rate(trace, start, end).map_err(|e| e.to_string())?;
    let max_abs = trace
        .times
        .iter()
        .enumerate()
        .filter(|(_, &t)| t >= start && t <= end)
        .map(|(i, _)| trace.min_u[i].abs().max(trace.max_u[i].abs()))
        .fold(0.0, f64::max);
    let p = &s.problem;
    let bound = -2.0 * p.alpha() * p.a().min() * (-p.alpha() * max_abs).exp();
    let limit = bound + DECAY_SLACK * bound.abs();
    let detail = format!(
        "fitted rate {rate:.4} on t ∈ [{start:.2}, {end:.2}], bound {bound:.4} (+10%: {limit:.4})"
    );
    if rate <= limit {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c7_barrier(lab: &Lab) -> Outcome {
    let mut worst = f64::INFINITY;
    let mut failed = Vec::new();
    let mut samples = 0;
    for (_, f) in lab.flows() {
        samples += f.barrier.samples;
        worst = worst.min(f.barrier.worst_margin);
        if !f.barrier.passed {
            failed.push(f.label.clone());
        }
    }
    let mut ode_err: f64 = 0.0;
    for s in lab.all() {
        let data = barrier_data(&s.problem, &ScalarField::zeros(s.problem.grid()))
            .map_err(|e| e.to_string())?;
        let (k, sb, al) = (data.forcing(), data.s_bar, data.alpha);
        let rk4 = comparison_ode_solve(|phi, _| sb + k * (-al * phi).exp(), data.c0, 5.0, 1e-3)
            .map_err(|e| e.to_string())?;
        let closed = data.phi(5.0).map_err(|e| e.to_string())?;
        ode_err = ode_err.max((rk4.last().unwrap().1 - closed).abs());
    }
    let detail = format!(
        "{samples} samples, worst margin φ − max(w − u) = {worst:.3e}; RK4 vs closed form at t=5: {ode_err:.2e}"
    );
    if failed.is_empty() && ode_err <= RK4_TOL {
        Ok(detail)
    } else {
        Err(format!("{detail}; violations in {failed:?}"))
    }
}

fn c8_bounds(lab: &Lab) -> Outcome {
    let mut worst_lower = f64::INFINITY;
    let mut worst_l2 = f64::INFINITY;
    let mut all = true;
    for s in lab.all() {
        let solutions = [&s.flow.u, &s.newton, &s.monotone.1.u]
            .into_iter()
            .chain(s.flow_alt.as_ref().map(|f| &f.u));
        for u in solutions {
            let r = verify_solution_bounds(&s.problem, u).map_err(|e| e.to_string())?;
            all &= r.passed;
            worst_lower = worst_lower.min(r.checks[0].margin);
            worst_l2 = worst_l2.min(r.checks.get(1).map_or(f64::NEG_INFINITY, |c| c.margin));
        }
    }
    // attained cases: B ≡ 0 constants
    let attained_p1 = verify_solution_bounds(&lab.p1.problem, &lab.p1.newton)
        .map_err(|e| e.to_string())?
        .checks[0]
        .margin;
    let p0 = constant_problem(-1.0, 0.0);
    let attained_p0 = verify_solution_bounds(&p0, &newton(&p0)?)
        .map_err(|e| e.to_string())?
        .checks[0]
        .margin;
    let detail = format!(
        "worst lower-bound margin {worst_lower:.3e}, worst L² margin {worst_l2:.3e} (slack {BOUND_SLACK:e}); \
         attained margins {attained_p1:.1e} (S=-e), {attained_p0:.1e} (S=-1)"
    );
    if all && attained_p1.abs() <= ATTAINED_TOL && attained_p0.abs() <= ATTAINED_TOL {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c9_monotone(lab: &Lab) -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for s in lab.all() {
        let (ul, out) = &s.monotone;
        ok &= out.iterates_monotone
            && out.max_increase <= 1e-10
            && out.min_gap_to_lower >= 0.0
            && ul.super_margin >= SIGN_MARGIN
            && ul.sub_margin >= SIGN_MARGIN;
        parts.push(format!(
            "{}: {} its, max increase {:.1e}, gap to u₋ {:.2e}, sign margins {:.2e}/{:.2e}",
            s.name,
            out.iterations,
            out.max_increase,
            out.min_gap_to_lower,
            ul.super_margin,
            ul.sub_margin
        ));
    }
    if ok {
        Ok(parts.join("; "))
    } else {
        Err(parts.join("; "))
    }
}

fn c10_identities() -> Outcome {
    let g = grid2(32);
    let u = ScalarField::from_fn(&g, |x| {
        0.7 * (2.0 * PI * x[0]).sin() * (4.0 * PI * x[1]).cos()
            + 0.3 * (2.0 * PI * (x[0] + 2.0 * x[1])).cos()
            + 0.1
    });
    let v = ScalarField::from_fn(&g, |x| {
        (2.0 * PI * x[1]).sin() * (6.0 * PI * x[0]).sin() + x[0] * (1.0 - x[0])
    });
    let psi = ScalarField::from_fn(&g, |x| {
        0.4 * (2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).sin() + 0.2 * (4.0 * PI * x[1]).cos()
    });
    let thetas = [
        ("constant", DriftForm::constant(&g, &[0.3, -0.2]).unwrap()),
        ("stream", DriftForm::from_stream(&g, &psi).unwrap()),
    ];
    type Named = (&'static str, fn(f64) -> f64);
    let fs: [Named; 3] = [("id", |t| t), ("square", |t| t * t), ("exp", f64::exp)];
    let mut drift = 0.0f64;
    for (_, theta) in &thetas {
        for (_, f) in &fs {
            let fu = u.map(f);
            drift = drift.max(
                integrate(&g, &drift_term(&g, &fu, theta).unwrap())
                    .unwrap()
                    .abs(),
            );
        }
    }
    let lap_u = laplacian(&g, &u).unwrap();
    let lap_v = laplacian(&g, &v).unwrap();
    let int_lap = integrate(&g, &lap_u).unwrap().abs();
    let uv = integrate(&g, &v.zip_map(&lap_u, |a, b| a * b).unwrap()).unwrap();
    let vu = integrate(&g, &u.zip_map(&lap_v, |a, b| a * b).unwrap()).unwrap();
    let adjoint = (uv - vu).abs();
    let detail =
        format!("|∫⟨dF(u),θ⟩| ≤ {drift:.2e}, |∫Δu| = {int_lap:.2e}, |∫vΔu − ∫uΔv| = {adjoint:.2e}");
    if drift <= DRIFT_TOL && int_lap <= IDENTITY_TOL && adjoint <= IDENTITY_TOL {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn kw(args: &[&str], config: &Path, extra: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_kw"))
        .args(args)
        .arg("--config")
        .arg(config)
        .args(extra)
        .output()
        .expect("kw runs")
        .status
        .code()
        .unwrap_or(-1)
}

fn c11_negative_controls() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let write = |name: &str, problem: &str| {
        let path = dir.path().join(name);
        let text = format!(
            r#"{{"grid": {{"points": [16, 16], "periods": [1.0, 1.0]}}, "problem": {problem}}}"#
        );
        std::fs::write(&path, text).unwrap();
        path
    };
    let zero_a = write(
        "zero_a.json",
        r#"{"S": -1, "A": 0, "B": 1, "alpha": 1, "beta": 1}"#,
    );
    let positive_s = write(
        "pos_s.json",
        r#"{"S": "0.2 + sin(2*pi*x)", "A": 1, "B": 1, "alpha": 1, "beta": 1}"#,
    );
    let divergent = write(
        "div.json",
        r#"{"S": -1, "A": 1, "B": 1, "alpha": 1, "beta": 1, "theta": ["sin(2*pi*x)", 0]}"#,
    );
    let good = write(
        "good.json",
        r#"{"S": -1, "A": 1, "B": 1, "alpha": 1, "beta": 1}"#,
    );
    let codes = [
        kw(&["validate"], &zero_a, &[]),
        kw(&["validate"], &positive_s, &[]),
        kw(&["validate"], &divergent, &[]),
    ];

    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();
    let solve = kw(&["solve"], &good, &["--out", out_s]);
    let solution = out.join("solution.txt");
    let clean = kw(
        &["bounds"],
        &good,
        &["--solution", solution.to_str().unwrap()],
    );
    let text = std::fs::read_to_string(&solution).map_err(|e| e.to_string())?;
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let value: f64 = lines[2].parse().unwrap();
    lines[2] = format!("{:.16e}", value - 10.0);
    let corrupted = dir.path().join("corrupted.txt");
    std::fs::write(&corrupted, lines.join("\n") + "\n").unwrap();
    let bad = kw(
        &["bounds"],
        &good,
        &["--solution", corrupted.to_str().unwrap()],
    );

    let detail = format!(
        "validate exits A≡0:{} ∫S≥0:{} div θ≠0:{}; solve {solve}, bounds clean {clean}, corrupted {bad}",
        codes[0], codes[1], codes[2]
    );
    if codes == [1, 1, 1] && solve == 0 && clean == 0 && bad == 4 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn report(id: usize, name: &str, outcome: Outcome, started: Instant) -> bool {
    let secs = started.elapsed().as_secs_f64();
    match outcome {
        Ok(detail) => {
            println!("criterion {id:>2} PASS  {name}: {detail} [{secs:.1}s]");
            true
        }
        Err(detail) => {
            println!("criterion {id:>2} FAIL  {name}: {detail} [{secs:.1}s]");
            false
        }
    }
}

fn main() -> ExitCode {
    let started = Instant::now();
    let lab = build_lab();
    println!(
        "solver runs for problems 1-3 took {:.1}s",
        started.elapsed().as_secs_f64()
    );

    type Criterion = (&'static str, fn(&Lab) -> Outcome);
    let with_lab: [Criterion; 9] = [
        ("exact constant solution", c1_exact_constant),
        ("golden-ratio constant solution", c2_golden),
        ("manufactured-solution convergence", c3_mms),
        ("uniqueness across starts and methods", c4_uniqueness),
        ("flow monotone diagnostics", c5_flow_monotone),
        ("exponential decay rate", c6_decay),
        ("barrier containment", c7_barrier),
        ("a-priori bounds", c8_bounds),
        ("monotone scheme shape", c9_monotone),
    ];

    let mut passed = 0;
    let mut total = 0;
    for (i, (name, check)) in with_lab.iter().enumerate() {
        let t = Instant::now();
        let outcome = match &lab {
            Ok(lab) => check(lab),
            Err(e) => Err(format!("solver setup failed: {e}")),
        };
        total += 1;
        passed += report(i + 1, name, outcome, t) as usize;
    }
    let t = Instant::now();
    total += 1;
    passed += report(10, "discrete identities", c10_identities(), t) as usize;
    let t = Instant::now();
    total += 1;
    passed += report(11, "negative controls", c11_negative_controls(), t) as usize;

    println!(
        "acceptance: {passed}/{total} criteria passed in {:.1}s",
        started.elapsed().as_secs_f64()
    );
    if passed == total {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
