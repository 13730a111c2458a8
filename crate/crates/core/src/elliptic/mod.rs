//! Stationary solvers: damped Newton iteration and the monotone
//! sub/supersolution scheme, plus cross-method comparison.

mod cross;
mod monotone;
mod newton;

pub use cross::{cross_validate, CrossReport, PairDifference, CROSS_TOL};
pub use monotone::{
    build_upper_lower, enclosure_margin, monotone_solve, monotone_solve_with, MonotoneOptions,
    MonotoneOutcome, UpperLowerData, UpperLowerParams,
};
pub use newton::{newton_solve, newton_solve_with, NewtonOptions, NewtonOutcome};

use crate::error::{KwError, Result};
use crate::manifold::{apply_l, gmres, integrate, ConstCoeffOp, ScalarField, SpectralSolver};
use crate::problem::ProblemData;

/// Solves `(L − q) x = rhs` for a nonnegative, not identically zero `q`.
///
/// Uniform drift with uniform `q` is diagonal in Fourier space and solved
/// directly; everything else goes through GMRES preconditioned by the
/// constant-coefficient operator with the means of θ and `q`.
pub(crate) fn solve_shifted(
    problem: &ProblemData,
    spectral: &SpectralSolver,
    q: &ScalarField,
    rhs: &[f64],
    tol: f64,
    accept: f64,
) -> Result<Vec<f64>> {
    let grid = problem.grid();
    let theta = problem.theta();
    let q_first = q.values()[0];
    let q_uniform = q.values().iter().all(|&v| v == q_first);
    if let (Some(t), true) = (theta.uniform_value(), q_uniform) {
        return Ok(spectral.solve(&ConstCoeffOp::shifted_l(-q_first, 1.0, t), rhs));
    }

    let shape = grid.shape();
    let op = |v: &[f64]| -> Vec<f64> {
        let lv =
            apply_l(grid, &ScalarField::from_raw(shape, v.to_vec()), theta).expect("shape checked");
        lv.values()
            .iter()
            .zip(v)
            .zip(q.values())
            .map(|((l, x), qq)| l - qq * x)
            .collect()
    };
    let q_mean = integrate(grid, q)?;
    let pre = ConstCoeffOp::shifted_l(-q_mean, 1.0, &theta.mean(grid));
    let precond = |v: &[f64]| spectral.solve(&pre, v);
    let out = gmres(&op, &precond, rhs, None, tol, 60, 4000);
    if !out.converged && out.residual > accept {
        return Err(KwError::NoConvergence {
            solver: "shifted linear solve",
            iterations: out.iterations,
            residual: out.residual,
        });
    }
    Ok(out.solution)
}
