//! Equation data `(S, A, B, α, β, θ)`, hypothesis checks, the pointwise
//! residual and manufactured problems.

use serde::Serialize;

use crate::error::{KwError, Result};
use crate::manifold::{apply_l, integrate, max_divergence, DriftForm, Grid, ScalarField, DIV_TOL};

/// Threshold below which a nonnegative field counts as identically zero.
pub const ZERO_TOL: f64 = 1e-12;

/// Largest exponent passed to `exp` before a typed overflow error is raised.
pub const EXP_GUARD: f64 = 700.0;

#[derive(Debug, Clone)]
pub struct ProblemData {
    grid: Grid,
    s: ScalarField,
    a: ScalarField,
    b: ScalarField,
    alpha: f64,
    beta: f64,
    theta: DriftForm,
}

impl ProblemData {
    pub fn new(
        grid: Grid,
        s: ScalarField,
        a: ScalarField,
        b: ScalarField,
        alpha: f64,
        beta: f64,
        theta: DriftForm,
    ) -> Result<Self> {
        for f in [&s, &a, &b] {
            grid.check(f)?;
        }
        if theta.components().len() != grid.dim() {
            return Err(KwError::GridMismatch {
                expected: grid.dim(),
                actual: theta.components().len(),
            });
        }
        for c in theta.components() {
            grid.check(c)?;
        }
        if !(alpha > 0.0 && alpha.is_finite()) || !(beta > 0.0 && beta.is_finite()) {
            return Err(KwError::InvalidArgument(format!(
                "exponents must be positive, got alpha={alpha}, beta={beta}"
            )));
        }
        Ok(Self {
            grid,
            s,
            a,
            b,
            alpha,
            beta,
            theta,
        })
    }

    /// Spatially constant data with θ = 0.
    pub fn constant(grid: &Grid, s: f64, a: f64, b: f64, alpha: f64, beta: f64) -> Result<Self> {
        Self::new(
            grid.clone(),
            ScalarField::constant(grid, s),
            ScalarField::constant(grid, a),
            ScalarField::constant(grid, b),
            alpha,
            beta,
            DriftForm::zero(grid),
        )
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn s(&self) -> &ScalarField {
        &self.s
    }
    pub fn a(&self) -> &ScalarField {
        &self.a
    }
    pub fn b(&self) -> &ScalarField {
        &self.b
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn theta(&self) -> &DriftForm {
        &self.theta
    }

    /// Same data with a different source term.
    pub fn with_source(&self, s: ScalarField) -> Result<Self> {
        self.grid.check(&s)?;
        Ok(Self { s, ..self.clone() })
    }

    pub fn with_drift(&self, theta: DriftForm) -> Result<Self> {
        Self::new(
            self.grid.clone(),
            self.s.clone(),
            self.a.clone(),
            self.b.clone(),
            self.alpha,
            self.beta,
            theta,
        )
    }

    /// Fails with [`KwError::Overflow`] when `α·max u` or `β·max(−u)` exceeds
    /// the guard.
    pub fn check_exponents(&self, u: &ScalarField) -> Result<()> {
        let up = self.alpha * u.max();
        let down = self.beta * (-u.min());
        for argument in [up, down] {
            if !argument.is_finite() || argument > EXP_GUARD {
                return Err(KwError::Overflow {
                    argument,
                    limit: EXP_GUARD,
                });
            }
        }
        Ok(())
    }

    /// `S + A·e^{αu} − B·e^{−βu}`, the zeroth-order part moved to the right.
    pub fn reaction(&self, u: &ScalarField) -> Result<ScalarField> {
        self.grid.check(u)?;
        self.check_exponents(u)?;
        let (al, be) = (self.alpha, self.beta);
        let values = u
            .values()
            .iter()
            .zip(self.s.values())
            .zip(self.a.values().iter().zip(self.b.values()))
            .map(|((&x, &s), (&a, &b))| s + a * (al * x).exp() - b * (-be * x).exp())
            .collect();
        ScalarField::new(&self.grid, values)
    }

    /// Derivative of [`Self::reaction`] in `u`: `α·A·e^{αu} + β·B·e^{−βu}`.
    pub fn reaction_slope(&self, u: &ScalarField) -> Result<ScalarField> {
        self.grid.check(u)?;
        self.check_exponents(u)?;
        let (al, be) = (self.alpha, self.beta);
        let values = u
            .values()
            .iter()
            .zip(self.a.values().iter().zip(self.b.values()))
            .map(|(&x, (&a, &b))| al * a * (al * x).exp() + be * b * (-be * x).exp())
            .collect();
        ScalarField::new(&self.grid, values)
    }

    /// Upper bound of [`Self::reaction_slope`] over all `u ∈ [lo, hi]`.
    pub fn reaction_slope_bound(&self, lo: f64, hi: f64) -> f64 {
        let a_max = self.a.max().max(0.0);
        let b_max = self.b.max().max(0.0);
        self.alpha * a_max * (self.alpha * hi).exp() + self.beta * b_max * (-self.beta * lo).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum HypothesisMode {
    /// `A ≥ 0, A ≢ 0, B ≥ 0, ∫S < 0`.
    Weak,
    /// Additionally `A > 0` everywhere.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Condition {
    pub name: &'static str,
    pub passed: bool,
    /// Human-readable reason when the condition fails.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub mode: HypothesisMode,
    pub passed: bool,
    pub integral_s: f64,
    pub min_a: f64,
    pub max_a: f64,
    pub min_b: f64,
    pub max_divergence: f64,
    pub conditions: Vec<Condition>,
}

impl HypothesisReport {
    pub fn failures(&self) -> impl Iterator<Item = &Condition> {
        self.conditions.iter().filter(|c| !c.passed)
    }
}

pub fn validate(problem: &ProblemData, mode: HypothesisMode) -> HypothesisReport {
    let grid = problem.grid();
    let integral_s = integrate(grid, problem.s()).unwrap_or(f64::NAN);
    let (min_a, max_a, min_b) = (problem.a().min(), problem.a().max(), problem.b().min());
    let max_div = max_divergence(grid, problem.theta()).unwrap_or(f64::INFINITY);

    let cond = |name, passed: bool, reason: String| Condition {
        name,
        passed,
        reason: (!passed).then_some(reason),
    };
    let mut conditions = vec![
        cond(
            "a_nonnegative",
            min_a >= 0.0,
            format!("A takes negative values (min {min_a:e})"),
        ),
        cond(
            "a_not_identically_zero",
            max_a > ZERO_TOL,
            "A identically zero".into(),
        ),
        cond(
            "b_nonnegative",
            min_b >= 0.0,
            format!("B takes negative values (min {min_b:e})"),
        ),
        cond(
            "integral_s_negative",
            integral_s < 0.0,
            format!("integral of S is not negative ({integral_s:e})"),
        ),
        cond(
            "theta_divergence_free",
            max_div <= DIV_TOL,
            format!("theta is not divergence-free (max |div| {max_div:e})"),
        ),
    ];
    if mode == HypothesisMode::Strict {
        conditions.push(cond(
            "a_positive",
            min_a > ZERO_TOL,
            format!("A is not strictly positive (min {min_a:e})"),
        ));
    }
    HypothesisReport {
        mode,
        passed: conditions.iter().all(|c| c.passed),
        integral_s,
        min_a,
        max_a,
        min_b,
        max_divergence: max_div,
        conditions,
    }
}

/// Returns an error describing the first failing condition.
pub fn require(problem: &ProblemData, mode: HypothesisMode) -> Result<HypothesisReport> {
    let report = validate(problem, mode);
    if let Some(c) = report.failures().next() {
        return Err(KwError::Hypothesis(c.reason.clone().unwrap_or_default()));
    }
    Ok(report)
}

/// `Lu − S − A·e^{αu} + B·e^{−βu}` at every node.
pub fn residual(problem: &ProblemData, u: &ScalarField) -> Result<ScalarField> {
    let mut out = apply_l(problem.grid(), u, problem.theta())?;
    out.add_scaled(-1.0, &problem.reaction(u)?)?;
    Ok(out)
}

/// Builds data for which `u_star` solves the discrete equation exactly:
/// `S := L u* − A·e^{αu*} + B·e^{−βu*}`.
pub fn manufacture(
    grid: &Grid,
    u_star: &ScalarField,
    a: ScalarField,
    b: ScalarField,
    alpha: f64,
    beta: f64,
    theta: DriftForm,
) -> Result<ProblemData> {
    let zero = ScalarField::zeros(grid);
    let base = ProblemData::new(grid.clone(), zero, a, b, alpha, beta, theta)?;
    // reaction with S = 0 is A e^{αu} − B e^{−βu}
    let mut s = apply_l(grid, u_star, base.theta())?;
    s.add_scaled(-1.0, &base.reaction(u_star)?)?;
    let integral = integrate(grid, &s)?;
    if !(integral < 0.0) {
        return Err(KwError::Hypothesis(format!(
            "manufactured S has integral {integral:e} >= 0; rescale u_star or enlarge A"
        )));
    }
    base.with_source(s)
}
