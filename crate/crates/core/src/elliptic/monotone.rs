//! Constructive sub/supersolutions and the monotone iteration between them.
//!
//! With `Lv₁ = S − S̄` and `Lv₂ = A − Ā` (both mean zero), the pair
//!
//! ```text
//! u₊ = v₁ + a·v₂ + b,    u₋ = v₁ − m
//! ```
//!
//! is a super/subsolution once
//!
//! ```text
//! a > −S̄/Ā
//! b > α⁻¹ ln a − c₁ − a·c₂
//! b > −c₁ − a·c₂ − β⁻¹ ln((S̄ + a·Ā)/sup B)      (only when sup B > 0)
//! m > sup v₁ − α⁻¹ ln(−S̄/sup A),   m > −a·c₂ − b
//! ```
//!
//! where `c₁ = min v₁`, `c₂ = min v₂`. Positivity of `a`, `b`, `m` is
//! enforced as an extra constraint.

use serde::Serialize;

use super::solve_shifted;
use crate::error::{KwError, Result};
use crate::manifold::{integrate, solve_linear_l, ScalarField, SpectralSolver};
use crate::problem::{self, residual, HypothesisMode, ProblemData, ZERO_TOL};

#[derive(Debug, Clone)]
pub struct UpperLowerParams {
    /// Explicit constants; `None` picks them from the constraints.
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub m: Option<f64>,
    /// `a = a_factor · max(−S̄/Ā, 1)` when not given.
    pub a_factor: f64,
    /// Added to the binding constraint for `b` and `m`.
    pub margin: f64,
    /// Required pointwise sign margin of the sub/supersolution residuals.
    pub strictness_margin: f64,
}

impl Default for UpperLowerParams {
    fn default() -> Self {
        Self {
            a: None,
            b: None,
            m: None,
            a_factor: 1.1,
            margin: 0.1,
            strictness_margin: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct UpperLowerData {
    #[serde(skip)]
    pub v1: ScalarField,
    #[serde(skip)]
    pub v2: ScalarField,
    pub s_bar: f64,
    pub a_bar: f64,
    pub a: f64,
    pub b: f64,
    pub m: f64,
    pub c1: f64,
    pub c2: f64,
    #[serde(skip)]
    pub u_plus: ScalarField,
    #[serde(skip)]
    pub u_minus: ScalarField,
    /// `−max residual(u₊)`, positive for a strict supersolution.
    pub super_margin: f64,
    /// `min residual(u₋)`, positive for a strict subsolution.
    pub sub_margin: f64,
}

pub fn build_upper_lower(
    problem: &ProblemData,
    params: &UpperLowerParams,
) -> Result<UpperLowerData> {
    problem::require(problem, HypothesisMode::Weak)?;
    let grid = problem.grid();
    let theta = problem.theta();
    let (alpha, beta) = (problem.alpha(), problem.beta());

    let s_bar = integrate(grid, problem.s())?;
    let a_bar = integrate(grid, problem.a())?;
    if !(a_bar > 0.0) {
        return Err(KwError::Hypothesis(format!(
            "mean of A must be positive, got {a_bar:e}"
        )));
    }
    let sup_a = problem.a().max();
    let sup_b = problem.b().max();

    let solve_centered = |f: &ScalarField, mean: f64| {
        let centered = f.map(|v| v - mean);
        solve_linear_l(grid, &centered, theta, 1e-11 * (1.0 + centered.sup_norm()))
    };
    let v1 = solve_centered(problem.s(), s_bar)?;
    let v2 = solve_centered(problem.a(), a_bar)?;
    let (c1, c2) = (v1.min(), v2.min());

    let a_floor = -s_bar / a_bar;
    let a = params.a.unwrap_or(params.a_factor * a_floor.max(1.0));
    if !(a > a_floor && a > 0.0) {
        return Err(KwError::InvalidArgument(format!(
            "a = {a} must exceed max(−S̄/Ā, 0) = {a_floor}"
        )));
    }

    let mut b_floor = (alpha.recip() * a.ln() - c1 - a * c2).max(0.0);
    if sup_b > ZERO_TOL {
        b_floor = b_floor.max(-c1 - a * c2 - ((s_bar + a * a_bar) / sup_b).ln() / beta);
    }
    let b = params.b.unwrap_or(b_floor + params.margin);
    if !(b > b_floor) {
        return Err(KwError::InvalidArgument(format!(
            "b = {b} must exceed {b_floor}"
        )));
    }

    let m_floor = (v1.max() - (-s_bar / sup_a).ln() / alpha)
        .max(-a * c2 - b)
        .max(0.0);
    let m = params.m.unwrap_or(m_floor + params.margin);
    if !(m > m_floor) {
        return Err(KwError::InvalidArgument(format!(
            "m = {m} must exceed {m_floor}"
        )));
    }

    let mut u_plus = v1.clone();
    u_plus.add_scaled(a, &v2)?;
    let u_plus = u_plus.map(|v| v + b);
    let u_minus = v1.map(|v| v - m);

    let super_margin = -residual(problem, &u_plus)?.max();
    let sub_margin = residual(problem, &u_minus)?.min();
    let gap = u_plus.sub(&u_minus)?.min();
    let strict = params.strictness_margin;
    if super_margin < strict {
        return Err(KwError::BarrierCheck(format!(
            "residual of u₊ reaches {:e}, need ≤ −{strict:e}; refine the grid",
            -super_margin
        )));
    }
    if sub_margin < strict {
        return Err(KwError::BarrierCheck(format!(
            "residual of u₋ drops to {sub_margin:e}, need ≥ {strict:e}; refine the grid"
        )));
    }
    if !(gap > 0.0) {
        return Err(KwError::BarrierCheck(format!(
            "u₋ < u₊ fails (min gap {gap:e})"
        )));
    }

    Ok(UpperLowerData {
        v1,
        v2,
        s_bar,
        a_bar,
        a,
        b,
        m,
        c1,
        c2,
        u_plus,
        u_minus,
        super_margin,
        sub_margin,
    })
}

/// `min_x min(u − u₋, u₊ − u)`; nonnegative when `u` lies in the order interval.
pub fn enclosure_margin(ul: &UpperLowerData, u: &ScalarField) -> Result<f64> {
    Ok(u.sub(&ul.u_minus)?.min().min(ul.u_plus.sub(u)?.min()))
}

#[derive(Debug, Clone)]
pub struct MonotoneOptions {
    pub tol: f64,
    pub max_iterations: usize,
    /// Pointwise increase tolerated between iterates.
    pub slack: f64,
    /// `K = k_factor · sup over [min u₋, max u₊] of the reaction slope`.
    pub k_factor: f64,
}

impl Default for MonotoneOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iterations: 50_000,
            slack: 1e-10,
            k_factor: 1.05,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotoneOutcome {
    #[serde(skip)]
    pub u: ScalarField,
    pub iterations: usize,
    pub converged: bool,
    pub iterates_monotone: bool,
    /// Largest pointwise increase `u_{k+1} − u_k` seen (≤ slack when monotone).
    pub max_increase: f64,
    /// Smallest `u_k − u₋` seen over all iterates.
    pub min_gap_to_lower: f64,
    pub shift: f64,
    pub final_step: f64,
    pub final_residual: f64,
}

pub fn monotone_solve(
    problem: &ProblemData,
    ul: &UpperLowerData,
    tol: f64,
) -> Result<MonotoneOutcome> {
    monotone_solve_with(
        problem,
        ul,
        &MonotoneOptions {
            tol,
            ..MonotoneOptions::default()
        },
    )
}

/// Iterates `u_{k+1} = (L − K)⁻¹(S + A·e^{αu_k} − B·e^{−βu_k} − K·u_k)` from
/// `u₀ = u₊` until `‖u_{k+1} − u_k‖_∞ ≤ tol`. Fails if an iterate increases
/// anywhere by more than the slack.
pub fn monotone_solve_with(
    problem: &ProblemData,
    ul: &UpperLowerData,
    options: &MonotoneOptions,
) -> Result<MonotoneOutcome> {
    let grid = problem.grid();
    let spectral = SpectralSolver::new(grid);
    let shift = options.k_factor * problem.reaction_slope_bound(ul.u_minus.min(), ul.u_plus.max());
    let k_field = ScalarField::constant(grid, shift);

    let mut u = ul.u_plus.clone();
    let mut max_increase = f64::NEG_INFINITY;
    let mut min_gap = u.sub(&ul.u_minus)?.min();
    let mut step = f64::INFINITY;
    let mut iterations = 0;

    while step > options.tol && iterations < options.max_iterations {
        let mut rhs = problem.reaction(&u)?;
        rhs.add_scaled(-shift, &u)?;
        let scale = 1.0 + rhs.sup_norm();
        let next = solve_shifted(
            problem,
            &spectral,
            &k_field,
            rhs.values(),
            1e-14 * scale,
            1e-12 * scale,
        )?;
        let next = ScalarField::new(grid, next)?;
        iterations += 1;

        let increase = next.sub(&u)?.max();
        max_increase = max_increase.max(increase);
        if increase > options.slack {
            return Err(KwError::MonotonicityViolation {
                iteration: iterations,
                increase,
            });
        }
        min_gap = min_gap.min(next.sub(&ul.u_minus)?.min());
        step = next.sup_distance(&u)?;
        u = next;
    }

    let final_residual = residual(problem, &u)?.sup_norm();
    Ok(MonotoneOutcome {
        converged: step <= options.tol,
        iterates_monotone: max_increase <= options.slack,
        max_increase,
        min_gap_to_lower: min_gap,
        shift,
        final_step: step,
        final_residual,
        iterations,
        u,
    })
}
