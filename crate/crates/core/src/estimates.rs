//! Explicit a-priori bounds for solutions and checks of computed fields
//! against them.
//!
//! Lower bound: with `Lw = S − S̄` and
//! `t₀ = −α⁻¹ ln(−S̄·e^{−α‖w‖_∞} / sup A)`, every solution satisfies
//! `u ≥ min w − t₀ =: −C`. The same argument goes through on the grid
//! (discrete maximum principle), so the bound is exact up to solver error.
//!
//! L² bound, for `η = min A > 0` and `C̃ = e^{βC}·max B`:
//!
//! ```text
//! ‖u‖²_{L²} ≤ C² + 144/α⁶·η⁻²·∫S² + (C̃·144/α⁶·η⁻² + 3)
//! ```

use serde::Serialize;

use crate::error::{KwError, Result};
use crate::manifold::{integrate, lp_norm, solve_linear_l, Grid, Norm, ScalarField};
use crate::problem::{ProblemData, ZERO_TOL};

/// Discretization error in `w` and in the solution both enter the checks.
pub const BOUND_SLACK: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct LowerBound {
    /// Solutions satisfy `u ≥ −c`.
    pub c: f64,
    pub t0: f64,
    pub w: ScalarField,
}

impl LowerBound {
    pub fn value(&self) -> f64 {
        -self.c
    }
}

pub fn lower_bound(problem: &ProblemData) -> Result<LowerBound> {
    let grid = problem.grid();
    let s_bar = integrate(grid, problem.s())?;
    if !(s_bar < 0.0) {
        return Err(KwError::Hypothesis(format!(
            "integral of S is not negative ({s_bar:e})"
        )));
    }
    let sup_a = problem.a().max();
    if !(sup_a > ZERO_TOL) {
        return Err(KwError::Hypothesis(format!(
            "sup A must be positive, got {sup_a:e}"
        )));
    }
    let centered = problem.s().map(|v| v - s_bar);
    let w = solve_linear_l(
        grid,
        &centered,
        problem.theta(),
        1e-11 * (1.0 + centered.sup_norm()),
    )?;
    let alpha = problem.alpha();
    let t0 = -(-s_bar * (-alpha * w.sup_norm()).exp() / sup_a).ln() / alpha;
    let c = -(w.min() - t0);
    if !c.is_finite() {
        return Err(KwError::NonFinite("lower bound constant"));
    }
    Ok(LowerBound { c, t0, w })
}

/// Fails when `min A ≤ 0`.
pub fn l2_upper_bound(problem: &ProblemData, c: f64) -> Result<f64> {
    let eta = problem.a().min();
    if !(eta > ZERO_TOL) {
        return Err(KwError::Hypothesis(format!(
            "L² bound needs min A > 0, got {eta:e}"
        )));
    }
    let k = 144.0 / problem.alpha().powi(6) / (eta * eta);
    let c_tilde = (problem.beta() * c).exp() * problem.b().max();
    let s_sq = integrate(problem.grid(), &problem.s().map(|v| v * v))?;
    let bound = (c * c + k * s_sq + c_tilde * k + 3.0).sqrt();
    if !bound.is_finite() {
        return Err(KwError::NonFinite("L² bound"));
    }
    Ok(bound)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    pub name: &'static str,
    pub passed: bool,
    pub value: f64,
    pub limit: f64,
    /// Distance to the limit, positive on the safe side.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    pub passed: bool,
    pub lower_bound_c: f64,
    pub t0: f64,
    pub w_sup_norm: f64,
    pub w_min: f64,
    pub eta: f64,
    pub c_tilde: Option<f64>,
    pub l2_bound: Option<f64>,
    pub slack: f64,
    pub checks: Vec<BoundCheck>,
    pub notices: Vec<String>,
}

pub fn verify_solution_bounds(problem: &ProblemData, u: &ScalarField) -> Result<BoundsReport> {
    verify_solution_bounds_with(problem, u, BOUND_SLACK)
}

pub fn verify_solution_bounds_with(
    problem: &ProblemData,
    u: &ScalarField,
    slack: f64,
) -> Result<BoundsReport> {
    let grid = problem.grid();
    grid.check(u)?;
    let lb = lower_bound(problem)?;
    let min_u = u.min();
    let mut checks = vec![BoundCheck {
        name: "lower_bound",
        passed: min_u >= lb.value() - slack,
        value: min_u,
        limit: lb.value(),
        margin: min_u - lb.value(),
    }];
    let mut notices = Vec::new();

    let eta = problem.a().min();
    let (c_tilde, l2_bound) = if eta > ZERO_TOL {
        let bound = l2_upper_bound(problem, lb.c)?;
        let norm = lp_norm(grid, u, Norm::L(2.0))?;
        checks.push(BoundCheck {
            name: "l2_bound",
            passed: norm <= bound + slack,
            value: norm,
            limit: bound,
            margin: bound - norm,
        });
        (
            Some((problem.beta() * lb.c).exp() * problem.b().max()),
            Some(bound),
        )
    } else {
        notices.push(format!("min A = {eta:e} is not positive; L² bound skipped"));
        (None, None)
    };

    Ok(BoundsReport {
        passed: checks.iter().all(|c| c.passed),
        lower_bound_c: lb.c,
        t0: lb.t0,
        w_sup_norm: lb.w.sup_norm(),
        w_min: lb.w.min(),
        eta,
        c_tilde,
        l2_bound,
        slack,
        checks,
        notices,
    })
}

/// `‖u‖_{L^p}` for `p = p0·2^k`, `k = 0..=levels`. Nondecreasing on a
/// unit-volume torus and tends to `‖u‖_∞`.
pub fn norm_ladder(grid: &Grid, u: &ScalarField, p0: f64, levels: usize) -> Result<Vec<f64>> {
    if !(p0 >= 1.0) || levels < 1 {
        return Err(KwError::InvalidArgument(format!(
            "need p0 ≥ 1 and levels ≥ 1, got p0 = {p0}, levels = {levels}"
        )));
    }
    (0..=levels)
        .map(|k| lp_norm(grid, u, Norm::L(p0 * 2f64.powi(k as i32))))
        .collect()
}
