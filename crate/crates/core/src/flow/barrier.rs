//! Scalar comparison barrier for the flow.
//!
//! With `w` the mean-zero solution of `Lw = S − S̄`, the quantity
//! `v = −u + w` is a subsolution of `v' = S̄ + K·e^{−αv}` where
//! `K = sup A · e^{α sup w}`. The maximum principle then bounds `v` by the
//! solution `φ` of that ODE started at `c₀ ≥ sup v(·, 0)`, which has a closed
//! form.

use serde::Serialize;

use super::FlowObserver;
use crate::error::{KwError, Result};
use crate::manifold::{integrate, solve_linear_l, ScalarField};
use crate::problem::ProblemData;

/// Headroom added to the smallest admissible starting value `c₀`.
pub const C0_HEADROOM: f64 = 0.1;

/// Default slack for `max(−u + w) ≤ φ(t)`.
pub const BARRIER_SLACK: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct BarrierData {
    pub w: ScalarField,
    pub s_bar: f64,
    pub c0: f64,
    pub sup_w: f64,
    pub min_w: f64,
    pub sup_a: f64,
    pub alpha: f64,
}

impl BarrierData {
    /// `K = sup A · e^{α sup w}`.
    pub fn forcing(&self) -> f64 {
        self.sup_a * (self.alpha * self.sup_w).exp()
    }

    /// Equilibrium `α⁻¹ ln(−K/S̄)` that `φ` approaches.
    pub fn limit(&self) -> f64 {
        (-self.forcing() / self.s_bar).ln() / self.alpha
    }

    pub fn phi(&self, t: f64) -> Result<f64> {
        barrier_phi(t, self, self.sup_a, self.alpha)
    }
}

/// Computes `w`, `S̄` and the default `c₀` for a flow started at `u0`.
pub fn barrier_data(problem: &ProblemData, u0: &ScalarField) -> Result<BarrierData> {
    let grid = problem.grid();
    grid.check(u0)?;
    let s_bar = integrate(grid, problem.s())?;
    if !(s_bar < 0.0) {
        return Err(KwError::Hypothesis(format!(
            "mean of S must be negative, got {s_bar:e}"
        )));
    }
    let sup_a = problem.a().max();
    if !(sup_a > 0.0) {
        return Err(KwError::Hypothesis("A identically zero".into()));
    }
    let centered = problem.s().map(|v| v - s_bar);
    let tol = 1e-11 * (1.0 + centered.sup_norm());
    let w = solve_linear_l(grid, &centered, problem.theta(), tol)?;
    let (sup_w, min_w) = (w.max(), w.min());
    let alpha = problem.alpha();
    let start = w.sub(u0)?.sup_norm();
    let equilibrium = (-sup_a * (alpha * sup_w).exp() / s_bar).ln() / alpha;
    Ok(BarrierData {
        w,
        s_bar,
        c0: start.max(equilibrium) + C0_HEADROOM,
        sup_w,
        min_w,
        sup_a,
        alpha,
    })
}

/// Closed-form solution of `φ' = S̄ + sup A·e^{α sup w}·e^{−αφ}`, `φ(0) = c₀`:
///
/// ```text
/// φ(t) = α⁻¹ ln( (K + S̄e^{αc₀})/S̄ · e^{αS̄t} − K/S̄ ),   K = sup A·e^{α sup w}
/// ```
pub fn barrier_phi(t: f64, data: &BarrierData, sup_a: f64, alpha: f64) -> Result<f64> {
    let k = sup_a * (alpha * data.sup_w).exp();
    let s = data.s_bar;
    let argument = (k + s * (alpha * data.c0).exp()) / s * (alpha * s * t).exp() - k / s;
    if !(argument > 0.0) || !argument.is_finite() {
        return Err(KwError::InvalidArgument(format!(
            "barrier log argument {argument:e} is not positive at t = {t}"
        )));
    }
    Ok(argument.ln() / alpha)
}

/// Classical fourth-order Runge-Kutta for `φ' = F(φ, t)`, `φ(0) = c₀`, on
/// `[0, T]` with steps no longer than `dt`. Returns `(t, φ)` samples.
pub fn comparison_ode_solve(
    f: impl Fn(f64, f64) -> f64,
    c0: f64,
    end: f64,
    dt: f64,
) -> Result<Vec<(f64, f64)>> {
    if !(dt > 0.0) || !(end >= 0.0) {
        return Err(KwError::InvalidArgument(
            "comparison ODE needs dt > 0 and T >= 0".into(),
        ));
    }
    let steps = (end / dt).ceil().max(1.0) as usize;
    let h = end / steps as f64;
    let mut out = Vec::with_capacity(steps + 1);
    let mut phi = c0;
    out.push((0.0, phi));
    for n in 0..steps {
        let t = n as f64 * h;
        let k1 = f(phi, t);
        let k2 = f(phi + 0.5 * h * k1, t + 0.5 * h);
        let k3 = f(phi + 0.5 * h * k2, t + 0.5 * h);
        let k4 = f(phi + h * k3, t + h);
        phi += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !phi.is_finite() || phi.abs() > 1e8 {
            return Err(KwError::NonFinite("comparison ODE (blow-up)"));
        }
        out.push(((n + 1) as f64 * h, phi));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BarrierReport {
    pub passed: bool,
    pub samples: usize,
    pub slack: f64,
    /// Smallest `φ(t) − max(−u(·,t) + w)` over the samples.
    pub worst_margin: f64,
    pub worst_time: f64,
    pub c0: f64,
}

/// Flow observer accumulating the barrier margin at every sample.
pub struct BarrierMonitor {
    data: BarrierData,
    slack: f64,
    samples: usize,
    worst_margin: f64,
    worst_time: f64,
    error: Option<KwError>,
}

impl BarrierMonitor {
    pub fn new(data: BarrierData, slack: f64) -> Self {
        Self {
            data,
            slack,
            samples: 0,
            worst_margin: f64::INFINITY,
            worst_time: 0.0,
            error: None,
        }
    }

    pub fn data(&self) -> &BarrierData {
        &self.data
    }

    pub fn report(&self) -> Result<BarrierReport> {
        if let Some(e) = &self.error {
            return Err(e.clone());
        }
        Ok(BarrierReport {
            passed: self.worst_margin + self.slack >= 0.0,
            samples: self.samples,
            slack: self.slack,
            worst_margin: self.worst_margin,
            worst_time: self.worst_time,
            c0: self.data.c0,
        })
    }
}

impl FlowObserver for BarrierMonitor {
    fn observe(&mut self, t: f64, u: &ScalarField) {
        let v_max = match self.data.w.sub(u) {
            Ok(v) => v.max(),
            Err(e) => {
                self.error = Some(e);
                return;
            }
        };
        match self.data.phi(t) {
            Ok(phi) => {
                self.samples += 1;
                let margin = phi - v_max;
                if margin < self.worst_margin {
                    self.worst_margin = margin;
                    self.worst_time = t;
                }
            }
            Err(e) => self.error = Some(e),
        }
    }
}

/// Checks `max(−u(·,t) + w) ≤ φ(t) + slack` over recorded snapshots of a flow
/// started at `u0`.
pub fn verify_flow_barrier<'a>(
    problem: &ProblemData,
    u0: &ScalarField,
    snapshots: impl IntoIterator<Item = (f64, &'a ScalarField)>,
    slack: f64,
) -> Result<BarrierReport> {
    let mut monitor = BarrierMonitor::new(barrier_data(problem, u0)?, slack);
    for (t, u) in snapshots {
        monitor.observe(t, u);
    }
    monitor.report()
}
