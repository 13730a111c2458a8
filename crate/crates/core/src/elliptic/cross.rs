use serde::Serialize;

use crate::error::{KwError, Result};
use crate::manifold::ScalarField;
use crate::problem::{residual, ProblemData};

/// Default agreement required between independently computed solutions.
pub const CROSS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairDifference {
    pub first: String,
    pub second: String,
    pub sup_difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossReport {
    pub passed: bool,
    pub cross_tol: f64,
    pub max_difference: f64,
    /// `‖residual‖_∞` of each named solution, in input order.
    pub residuals: Vec<(String, f64)>,
    pub pairs: Vec<PairDifference>,
}

/// Pairwise sup-norm differences between named solutions of one problem.
pub fn cross_validate(
    problem: &ProblemData,
    solutions: &[(&str, &ScalarField)],
    cross_tol: f64,
) -> Result<CrossReport> {
    if solutions.len() < 2 {
        return Err(KwError::InvalidArgument(
            "cross validation needs at least two solutions".into(),
        ));
    }
    let residuals = solutions
        .iter()
        .map(|(name, u)| Ok((name.to_string(), residual(problem, u)?.sup_norm())))
        .collect::<Result<Vec<_>>>()?;
    let mut pairs = Vec::new();
    for (i, (first, u)) in solutions.iter().enumerate() {
        for (second, v) in &solutions[i + 1..] {
            pairs.push(PairDifference {
                first: first.to_string(),
                second: second.to_string(),
                sup_difference: u.sup_distance(v)?,
            });
        }
    }
    let max_difference = pairs.iter().map(|p| p.sup_difference).fold(0.0, f64::max);
    Ok(CrossReport {
        passed: max_difference <= cross_tol,
        cross_tol,
        max_difference,
        residuals,
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{Grid, GridSpec};

    #[test]
    fn identical_inputs_agree() {
        let g = Grid::new(GridSpec::uniform(1, 8)).unwrap();
        let p = ProblemData::constant(&g, -1.0, 1.0, 0.0, 1.0, 1.0).unwrap();
        let u = ScalarField::zeros(&g);
        let r = cross_validate(&p, &[("a", &u), ("b", &u), ("c", &u)], CROSS_TOL).unwrap();
        assert!(r.passed);
        assert_eq!(r.pairs.len(), 3);
        assert_eq!(r.max_difference, 0.0);
        assert!(cross_validate(&p, &[("a", &u)], CROSS_TOL).is_err());
    }

    #[test]
    fn reports_disagreement() {
        let g = Grid::new(GridSpec::uniform(1, 8)).unwrap();
        let p = ProblemData::constant(&g, -1.0, 1.0, 0.0, 1.0, 1.0).unwrap();
        let u = ScalarField::zeros(&g);
        let v = ScalarField::constant(&g, 1e-3);
        let r = cross_validate(&p, &[("a", &u), ("b", &v)], CROSS_TOL).unwrap();
        assert!(!r.passed);
        assert!((r.max_difference - 1e-3).abs() < 1e-18);
    }
}
