use super::krylov::gmres;
use super::spectral::{ConstCoeffOp, SpectralSolver};
use super::{DriftForm, Grid, ScalarField};
use crate::error::{KwError, Result};

/// Compact second-order periodic Laplacian `Σ_i (u₊ − 2u + u₋)/h_i²`.
pub fn laplacian(grid: &Grid, u: &ScalarField) -> Result<ScalarField> {
    grid.check(u)?;
    let v = u.values();
    let mut out = vec![0.0; v.len()];
    for axis in 0..grid.dim() {
        let inv_h2 = 1.0 / (grid.spacings()[axis] * grid.spacings()[axis]);
        for (o, (nb, &c)) in out.iter_mut().zip(grid.neighbors(axis).iter().zip(v)) {
            *o += (v[nb[1]] - 2.0 * c + v[nb[0]]) * inv_h2;
        }
    }
    Ok(ScalarField::from_raw(u.shape(), out))
}

pub(crate) fn central_difference(grid: &Grid, u: &ScalarField, axis: usize) -> ScalarField {
    let v = u.values();
    let inv_2h = 0.5 / grid.spacings()[axis];
    let out = grid
        .neighbors(axis)
        .iter()
        .map(|nb| (v[nb[1]] - v[nb[0]]) * inv_2h)
        .collect();
    ScalarField::from_raw(u.shape(), out)
}

/// `⟨du, θ⟩ = Σ_i θ_i · D_i u` with central differences `D_i`.
pub fn drift_term(grid: &Grid, u: &ScalarField, theta: &DriftForm) -> Result<ScalarField> {
    grid.check(u)?;
    check_drift(grid, theta)?;
    let mut out = vec![0.0; u.len()];
    if theta.is_zero() {
        return Ok(ScalarField::from_raw(u.shape(), out));
    }
    let v = u.values();
    for (axis, comp) in theta.components().iter().enumerate() {
        let inv_2h = 0.5 / grid.spacings()[axis];
        for ((o, nb), &t) in out.iter_mut().zip(grid.neighbors(axis)).zip(comp.values()) {
            *o += t * (v[nb[1]] - v[nb[0]]) * inv_2h;
        }
    }
    Ok(ScalarField::from_raw(u.shape(), out))
}

/// `L u = Δu − ⟨du, θ⟩`.
pub fn apply_l(grid: &Grid, u: &ScalarField, theta: &DriftForm) -> Result<ScalarField> {
    let mut lap = laplacian(grid, u)?;
    if !theta.is_zero() {
        let drift = drift_term(grid, u, theta)?;
        lap.add_scaled(-1.0, &drift)?;
    }
    Ok(lap)
}

/// Central-difference divergence `Σ_i D_i θ_i`.
pub fn divergence(grid: &Grid, theta: &DriftForm) -> Result<ScalarField> {
    check_drift(grid, theta)?;
    let mut out = vec![0.0; grid.node_count()];
    if theta.uniform_value().is_some() {
        return Ok(ScalarField::from_raw(grid.shape(), out));
    }
    for (axis, comp) in theta.components().iter().enumerate() {
        let d = central_difference(grid, comp, axis);
        for (o, v) in out.iter_mut().zip(d.values()) {
            *o += v;
        }
    }
    Ok(ScalarField::from_raw(grid.shape(), out))
}

pub fn max_divergence(grid: &Grid, theta: &DriftForm) -> Result<f64> {
    Ok(divergence(grid, theta)?.sup_norm())
}

fn check_drift(grid: &Grid, theta: &DriftForm) -> Result<()> {
    if theta.components().len() != grid.dim() {
        return Err(KwError::GridMismatch {
            expected: grid.dim(),
            actual: theta.components().len(),
        });
    }
    theta.components().iter().try_for_each(|c| grid.check(c))
}

/// `∫_M f`, which is also the mean since the torus has unit volume.
/// Uses compensated summation so that discrete identities hold to rounding.
pub fn integrate(grid: &Grid, f: &ScalarField) -> Result<f64> {
    grid.check(f)?;
    Ok(grid.node_weight() * compensated_sum(f.values().iter().copied()))
}

fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Norm {
    L(f64),
    Sup,
}

/// `(∫|f|^p)^{1/p}`, or `max|f|` for [`Norm::Sup`]. Values are scaled by the
/// sup-norm first so that large exponents do not overflow.
pub fn lp_norm(grid: &Grid, f: &ScalarField, norm: Norm) -> Result<f64> {
    grid.check(f)?;
    let sup = f.sup_norm();
    match norm {
        Norm::Sup => Ok(sup),
        Norm::L(p) if !(p >= 1.0) => Err(KwError::InvalidArgument(format!(
            "L^p norm needs p >= 1, got {p}"
        ))),
        Norm::L(_) if sup == 0.0 => Ok(0.0),
        Norm::L(p) if p.is_infinite() => Ok(sup),
        Norm::L(p) => {
            let s = compensated_sum(f.values().iter().map(|v| (v.abs() / sup).powf(p)));
            Ok(sup * (grid.node_weight() * s).powf(1.0 / p))
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LinearSolveOptions {
    /// Largest `|∫f|` accepted; smaller means are subtracted off.
    pub compatibility_tol: f64,
    pub restart: usize,
    pub max_iterations: usize,
}

impl Default for LinearSolveOptions {
    fn default() -> Self {
        Self {
            compatibility_tol: 1e-10,
            restart: 60,
            max_iterations: 3000,
        }
    }
}

/// Mean-zero solution of `L u = f` with `‖L u − f‖_∞ ≤ tol`.
pub fn solve_linear_l(
    grid: &Grid,
    f: &ScalarField,
    theta: &DriftForm,
    tol: f64,
) -> Result<ScalarField> {
    solve_linear_l_with(grid, f, theta, tol, &LinearSolveOptions::default(), None)
}

pub fn solve_linear_l_with(
    grid: &Grid,
    f: &ScalarField,
    theta: &DriftForm,
    tol: f64,
    options: &LinearSolveOptions,
    spectral: Option<&SpectralSolver>,
) -> Result<ScalarField> {
    grid.check(f)?;
    check_drift(grid, theta)?;
    let mean = integrate(grid, f)?;
    if mean.abs() > options.compatibility_tol {
        return Err(KwError::IncompatibleRhs {
            mean,
            tol: options.compatibility_tol,
        });
    }
    let rhs: Vec<f64> = f.values().iter().map(|v| v - mean).collect();
    if rhs.iter().all(|&v| v == 0.0) {
        return Ok(ScalarField::zeros(grid));
    }

    let owned;
    let spectral = match spectral {
        Some(s) => s,
        None => {
            owned = SpectralSolver::new(grid);
            &owned
        }
    };
    let shape = grid.shape();
    let op = |v: &[f64]| -> Vec<f64> {
        apply_l(grid, &ScalarField::from_raw(shape, v.to_vec()), theta)
            .expect("shape checked")
            .into_values()
    };

    let mut solution = match theta.uniform_value() {
        Some(t) => spectral.solve(&ConstCoeffOp::l_operator(t), &rhs),
        None => {
            let precond_op = ConstCoeffOp::l_operator(&theta.mean(grid));
            let precond = |v: &[f64]| spectral.solve(&precond_op, v);
            let out = gmres(
                &op,
                &precond,
                &rhs,
                None,
                tol,
                options.restart,
                options.max_iterations,
            );
            if !out.converged {
                return Err(KwError::NoConvergence {
                    solver: "linear solve for L",
                    iterations: out.iterations,
                    residual: out.residual,
                });
            }
            out.solution
        }
    };

    let center = compensated_sum(solution.iter().copied()) / solution.len() as f64;
    solution.iter_mut().for_each(|v| *v -= center);
    let residual = op(&solution)
        .iter()
        .zip(&rhs)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if residual > tol {
        return Err(KwError::NoConvergence {
            solver: "linear solve for L",
            iterations: 0,
            residual,
        });
    }
    ScalarField::new(grid, solution)
}
