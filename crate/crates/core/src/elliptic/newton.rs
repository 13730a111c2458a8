use serde::Serialize;

use super::solve_shifted;
use crate::error::{KwError, Result};
use crate::manifold::{ScalarField, SpectralSolver};
use crate::problem::{self, residual, HypothesisMode, ProblemData};

#[derive(Debug, Clone)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Step halvings tried when the full step does not reduce the residual.
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
            max_halvings: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NewtonOutcome {
    #[serde(skip)]
    pub u: ScalarField,
    pub iterations: usize,
    pub converged: bool,
    /// `‖residual‖_∞` before the first step and after each step.
    pub residual_history: Vec<f64>,
    /// Damping factor used at each step.
    pub step_lengths: Vec<f64>,
}

impl NewtonOutcome {
    pub fn final_residual(&self) -> f64 {
        *self
            .residual_history
            .last()
            .expect("history starts with the initial residual")
    }
}

pub fn newton_solve(
    problem: &ProblemData,
    u0: &ScalarField,
    tol: f64,
    max_iter: usize,
) -> Result<NewtonOutcome> {
    newton_solve_with(
        problem,
        u0,
        &NewtonOptions {
            tol,
            max_iter,
            ..NewtonOptions::default()
        },
    )
}

/// Damped Newton iteration. Each step solves
/// `(L − αAe^{αu} − βBe^{−βu}) δ = −residual(u)` and takes the largest step
/// `2^{-k} δ` (k ≤ `max_halvings`) that lowers the residual sup-norm.
pub fn newton_solve_with(
    problem: &ProblemData,
    u0: &ScalarField,
    options: &NewtonOptions,
) -> Result<NewtonOutcome> {
    problem::require(problem, HypothesisMode::Weak)?;
    problem.grid().check(u0)?;
    let spectral = SpectralSolver::new(problem.grid());

    let mut u = u0.clone();
    let mut r = residual(problem, &u)?;
    let mut norm = r.sup_norm();
    let mut history = vec![norm];
    let mut steps = Vec::new();

    while norm > options.tol && steps.len() < options.max_iter {
        let slope = problem.reaction_slope(&u)?;
        let rhs: Vec<f64> = r.values().iter().map(|v| -v).collect();
        // Inexact solve with forcing term min(1e-3, ‖r‖), floored well below tol.
        let linear_tol = (norm * norm.min(1e-3)).max(1e-2 * options.tol);
        let delta = solve_shifted(problem, &spectral, &slope, &rhs, linear_tol, 0.5 * norm)?;
        let delta = ScalarField::new(problem.grid(), delta)?;

        let mut factor = 1.0;
        let mut accepted = None;
        for _ in 0..=options.max_halvings {
            let mut trial = u.clone();
            trial.add_scaled(factor, &delta)?;
            match residual(problem, &trial) {
                Ok(tr) if tr.sup_norm() < norm => {
                    accepted = Some((trial, tr));
                    break;
                }
                Ok(_) | Err(KwError::Overflow { .. }) => factor *= 0.5,
                Err(e) => return Err(e),
            }
        }
        let Some((next, next_r)) = accepted else {
            // no decrease along δ: we are at the rounding floor or the step is bad
            break;
        };
        u = next;
        r = next_r;
        norm = r.sup_norm();
        history.push(norm);
        steps.push(factor);
    }

    Ok(NewtonOutcome {
        converged: norm <= options.tol,
        iterations: steps.len(),
        u,
        residual_history: history,
        step_lengths: steps,
    })
}
