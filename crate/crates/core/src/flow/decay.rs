use super::FlowTrace;
use crate::error::{KwError, Result};
use crate::problem::ProblemData;

/// Least-squares slope of `ln(sup|∂u/∂t|²)` against `t` over the samples with
/// `t ∈ [start, end]`.
pub fn fit_decay_rate(trace: &FlowTrace, start: f64, end: f64) -> Result<f64> {
    let points: Vec<(f64, f64)> = trace
        .times
        .iter()
        .zip(&trace.sup_ut)
        .filter(|(&t, _)| t >= start && t <= end)
        .map(|(&t, &s)| (t, s))
        .collect();
    if points.len() < 5 {
        return Err(KwError::InvalidArgument(format!(
            "decay fit needs at least 5 samples in [{start}, {end}], found {}",
            points.len()
        )));
    }
    if points.iter().any(|&(_, s)| !(s > 0.0)) {
        return Err(KwError::InvalidArgument(
            "decay fit needs positive sup|u_t| samples".into(),
        ));
    }
    let n = points.len() as f64;
    let mean_t = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| (p.1 * p.1).ln()).sum::<f64>() / n;
    let (mut num, mut den) = (0.0, 0.0);
    for &(t, s) in &points {
        let dt = t - mean_t;
        num += dt * ((s * s).ln() - mean_y);
        den += dt * dt;
    }
    Ok(num / den)
}

/// Guaranteed rate for `ln sup|∂u/∂t|²` when `‖u‖_∞ ≤ sup_u`:
/// `−2(α·inf A·e^{−α sup_u} + β·inf B·e^{−β sup_u})`.
pub fn decay_rate_bound(problem: &ProblemData, sup_u: f64) -> f64 {
    let (al, be) = (problem.alpha(), problem.beta());
    let a = problem.a().min().max(0.0);
    let b = problem.b().min().max(0.0);
    -2.0 * (al * a * (-al * sup_u).exp() + be * b * (-be * sup_u).exp())
}
