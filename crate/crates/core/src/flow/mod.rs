//! The parabolic flow `∂u/∂t = Lu − S − A·e^{αu} + B·e^{−βu}` and its
//! diagnostics.
//!
//! Two steppers are provided. `Explicit` is forward Euler under the periodic
//! CFL bound. `Imex` treats the linear operator `L` implicitly and the
//! exponential reaction explicitly, so each step is one constant-coefficient
//! linear solve. Both keep `sup|∂u/∂t|` nonincreasing as long as
//! `dt · max(αAe^{αu} + βBe^{−βu})` stays below 1.

mod barrier;
mod decay;

pub use barrier::{
    barrier_data, barrier_phi, comparison_ode_solve, verify_flow_barrier, BarrierData,
    BarrierMonitor, BarrierReport, BARRIER_SLACK, C0_HEADROOM,
};
pub use decay::{decay_rate_bound, fit_decay_rate};

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{KwError, Result};
use crate::manifold::{
    gmres, integrate, ConstCoeffOp, DriftForm, Grid, ScalarField, SpectralSolver,
};
use crate::problem::{self, residual, HypothesisMode, ProblemData};

/// Relative slack for monotonicity checks on sampled quantities.
pub const MONOTONE_SLACK: f64 = 1e-10;

/// Largest step the automatic IMEX choice will take.
const IMEX_MAX_DT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Explicit,
    Imex,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeStep {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub struct FlowConfig {
    pub scheme: Scheme,
    pub dt: TimeStep,
    /// Stop once `sup|∂u/∂t| = ‖residual‖_∞` falls below this.
    pub residual_tol: f64,
    pub max_time: f64,
    /// Record a trace sample every this many steps.
    pub trace_stride: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Imex,
            dt: TimeStep::Auto,
            residual_tol: 1e-8,
            max_time: 200.0,
            trace_stride: 10,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FlowTrace {
    pub times: Vec<f64>,
    pub sup_ut: Vec<f64>,
    /// Present only when θ ≡ 0.
    pub energy: Option<Vec<f64>>,
    pub min_u: Vec<f64>,
    pub max_u: Vec<f64>,
}

impl FlowTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest increase between consecutive samples of `sup|∂u/∂t|`, measured
    /// against the slack `MONOTONE_SLACK·(1 + value)`. Nonpositive means the
    /// sequence is nonincreasing within slack.
    pub fn worst_sup_ut_increase(&self) -> f64 {
        worst_increase(&self.sup_ut)
    }

    pub fn worst_energy_increase(&self) -> Option<f64> {
        self.energy.as_deref().map(worst_increase)
    }

    /// CSV with columns `t,sup_ut,energy,min_u,max_u`; `energy` is empty when
    /// θ ≠ 0.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,sup_ut,energy,min_u,max_u\n");
        for i in 0..self.len() {
            let energy = self
                .energy
                .as_ref()
                .map(|e| e[i].to_string())
                .unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                self.times[i], self.sup_ut[i], energy, self.min_u[i], self.max_u[i]
            );
        }
        out
    }

    fn push(&mut self, t: f64, sup_ut: f64, energy: Option<f64>, u: &ScalarField) {
        self.times.push(t);
        self.sup_ut.push(sup_ut);
        if let (Some(series), Some(e)) = (self.energy.as_mut(), energy) {
            series.push(e);
        }
        self.min_u.push(u.min());
        self.max_u.push(u.max());
    }
}

fn worst_increase(series: &[f64]) -> f64 {
    series
        .windows(2)
        .map(|w| w[1] - w[0] - MONOTONE_SLACK * (1.0 + w[0].abs()))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Receives the state at every trace sample.
pub trait FlowObserver {
    fn observe(&mut self, t: f64, u: &ScalarField);
}

impl<F: FnMut(f64, &ScalarField)> FlowObserver for F {
    fn observe(&mut self, t: f64, u: &ScalarField) {
        self(t, u)
    }
}

#[derive(Debug, Clone)]
pub struct FlowOutcome {
    pub u: ScalarField,
    pub trace: FlowTrace,
    pub converged: bool,
    pub steps: usize,
    pub dt: f64,
    pub final_residual: f64,
}

/// Reusable stepper; owns the spectral plans for its grid.
pub struct FlowStepper<'a> {
    problem: &'a ProblemData,
    scheme: Scheme,
    dt: f64,
    spectral: SpectralSolver,
}

impl<'a> FlowStepper<'a> {
    pub fn new(problem: &'a ProblemData, scheme: Scheme, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(KwError::InvalidArgument(format!(
                "time step must be positive, got {dt}"
            )));
        }
        if scheme == Scheme::Explicit {
            let bound = problem.grid().explicit_dt_bound();
            if dt > bound {
                return Err(KwError::InvalidArgument(format!(
                    "explicit step {dt:e} exceeds the stability bound {bound:e}"
                )));
            }
        }
        Ok(Self {
            problem,
            scheme,
            dt,
            spectral: SpectralSolver::new(problem.grid()),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advances one step given the current state and its residual.
    pub fn step(&self, u: &ScalarField, residual_u: &ScalarField) -> Result<ScalarField> {
        let next = match self.scheme {
            Scheme::Explicit => {
                let mut next = u.clone();
                next.add_scaled(self.dt, residual_u)?;
                next
            }
            Scheme::Imex => self.implicit_step(u)?,
        };
        if !next.is_finite() {
            return Err(KwError::NonFinite("flow step"));
        }
        Ok(next)
    }

    /// Solves `(I − dt·L) u_new = u − dt·(S + A·e^{αu} − B·e^{−βu})`.
    fn implicit_step(&self, u: &ScalarField) -> Result<ScalarField> {
        let grid = self.problem.grid();
        let theta = self.problem.theta();
        let mut rhs = u.clone();
        rhs.add_scaled(-self.dt, &self.problem.reaction(u)?)?;
        let values = match theta.uniform_value() {
            Some(t) => self
                .spectral
                .solve(&ConstCoeffOp::shifted_l(1.0, -self.dt, t), rhs.values()),
            None => self.krylov_implicit(grid, theta, &rhs, u)?,
        };
        ScalarField::new(grid, values)
    }

    fn krylov_implicit(
        &self,
        grid: &Grid,
        theta: &DriftForm,
        rhs: &ScalarField,
        guess: &ScalarField,
    ) -> Result<Vec<f64>> {
        let dt = self.dt;
        let shape = grid.shape();
        let op = |v: &[f64]| -> Vec<f64> {
            let field = ScalarField::from_raw(shape, v.to_vec());
            let lv = crate::manifold::apply_l(grid, &field, theta).expect("shape checked");
            v.iter().zip(lv.values()).map(|(a, b)| a - dt * b).collect()
        };
        let pre = ConstCoeffOp::shifted_l(1.0, -dt, &theta.mean(grid));
        let precond = |v: &[f64]| self.spectral.solve(&pre, v);
        let scale = 1.0 + rhs.sup_norm();
        let out = gmres(
            &op,
            &precond,
            rhs.values(),
            Some(guess.values()),
            1e-13 * scale,
            40,
            2000,
        );
        // stagnation at the rounding floor is acceptable
        if !out.converged && out.residual > 1e-11 * scale {
            return Err(KwError::NoConvergence {
                solver: "implicit flow step",
                iterations: out.iterations,
                residual: out.residual,
            });
        }
        Ok(out.solution)
    }
}

/// One step of the flow from `u`.
pub fn flow_step(
    u: &ScalarField,
    problem: &ProblemData,
    dt: f64,
    scheme: Scheme,
) -> Result<ScalarField> {
    let stepper = FlowStepper::new(problem, scheme, dt)?;
    let r = residual(problem, u)?;
    stepper.step(u, &r)
}

/// Resolves [`TimeStep::Auto`]: the CFL bound for the explicit scheme, and for
/// IMEX half the inverse of the reaction slope at `u0`, capped at 0.1.
pub fn resolve_dt(problem: &ProblemData, u0: &ScalarField, config: &FlowConfig) -> Result<f64> {
    match (config.dt, config.scheme) {
        (TimeStep::Fixed(dt), _) => Ok(dt),
        (TimeStep::Auto, Scheme::Explicit) => Ok(problem.grid().explicit_dt_bound()),
        (TimeStep::Auto, Scheme::Imex) => {
            let slope = problem.reaction_slope(u0)?.max();
            Ok(if slope > 0.0 {
                (0.5 / slope).min(IMEX_MAX_DT)
            } else {
                IMEX_MAX_DT
            })
        }
    }
}

pub fn run_flow(
    u0: &ScalarField,
    problem: &ProblemData,
    config: &FlowConfig,
) -> Result<FlowOutcome> {
    run_flow_observed(u0, problem, config, &mut |_: f64, _: &ScalarField| {})
}

pub fn run_flow_observed(
    u0: &ScalarField,
    problem: &ProblemData,
    config: &FlowConfig,
    observer: &mut dyn FlowObserver,
) -> Result<FlowOutcome> {
    problem::require(problem, HypothesisMode::Weak)?;
    problem.grid().check(u0)?;
    if config.trace_stride == 0 || !(config.residual_tol > 0.0) || !(config.max_time > 0.0) {
        return Err(KwError::InvalidArgument(
            "flow needs positive trace_stride, residual_tol and max_time".into(),
        ));
    }
    let dt = resolve_dt(problem, u0, config)?;
    let stepper = FlowStepper::new(problem, config.scheme, dt)?;
    let with_energy = problem.theta().is_zero();

    let mut trace = FlowTrace {
        energy: with_energy.then(Vec::new),
        ..FlowTrace::default()
    };
    let mut sample = |trace: &mut FlowTrace, t: f64, u: &ScalarField, sup: f64| -> Result<()> {
        let e = if with_energy {
            Some(energy(problem, u)?)
        } else {
            None
        };
        trace.push(t, sup, e, u);
        observer.observe(t, u);
        Ok(())
    };

    let mut u = u0.clone();
    let mut r = residual(problem, &u)?;
    let mut sup = r.sup_norm();
    sample(&mut trace, 0.0, &u, sup)?;

    let max_steps = (config.max_time / dt).ceil() as usize;
    let mut steps = 0;
    let mut converged = sup <= config.residual_tol;
    while !converged && steps < max_steps {
        u = stepper.step(&u, &r)?;
        steps += 1;
        r = residual(problem, &u)?;
        sup = r.sup_norm();
        converged = sup <= config.residual_tol;
        if converged || steps % config.trace_stride == 0 || steps == max_steps {
            sample(&mut trace, steps as f64 * dt, &u, sup)?;
        }
    }

    Ok(FlowOutcome {
        u,
        trace,
        converged,
        steps,
        dt,
        final_residual: sup,
    })
}

/// `∫ ½|∇u|² + S·u + (A/α)·e^{αu} + (B/β)·e^{−βu}` for θ ≡ 0.
///
/// The gradient uses forward differences, so that `∫½|∇u|² = −½∫u·Δu` holds
/// exactly and the discrete flow is the gradient flow of this functional.
pub fn energy(problem: &ProblemData, u: &ScalarField) -> Result<f64> {
    if !problem.theta().is_zero() {
        return Err(KwError::InvalidArgument(
            "energy is only defined for θ ≡ 0".into(),
        ));
    }
    let grid = problem.grid();
    grid.check(u)?;
    problem.check_exponents(u)?;
    let (al, be) = (problem.alpha(), problem.beta());
    let v = u.values();
    let mut density = vec![0.0; v.len()];
    for axis in 0..grid.dim() {
        let h = grid.spacings()[axis];
        for ((d, nb), &c) in density.iter_mut().zip(grid.neighbors(axis)).zip(v) {
            let g = (v[nb[1]] - c) / h;
            *d += 0.5 * g * g;
        }
    }
    for (i, d) in density.iter_mut().enumerate() {
        let (s, a, b) = (
            problem.s().values()[i],
            problem.a().values()[i],
            problem.b().values()[i],
        );
        *d += s * v[i] + a / al * (al * v[i]).exp() + b / be * (-be * v[i]).exp();
    }
    integrate(grid, &ScalarField::new(grid, density)?)
}
