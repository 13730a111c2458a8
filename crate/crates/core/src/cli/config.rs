//! Run configuration (JSON) and construction of grids, problems and fields
//! from it.
//!
//! ```json
//! {
//!   "grid": { "points": [64, 64], "periods": [1.0, 1.0] },
//!   "problem": {
//!     "S": "-1", "A": "2 + cos(2*pi*x)", "B": { "file": "b.txt" },
//!     "theta": ["0.3", "-0.2"], "alpha": 1.5, "beta": 0.7
//!   },
//!   "exact": "0.5*sin(2*pi*x)*cos(2*pi*y)",
//!   "solver": { "method": "newton", "tol": 1e-10 }
//! }
//! ```
//!
//! A field is a number, an expression string, or `{"file": path}` naming a
//! field dump (relative paths resolve against the config file). θ is a list
//! of component fields or `{"stream": expr}` on 2-tori. When `S` is omitted
//! and `exact` is given, `S` is manufactured from `exact` in closed form.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::expr::Expr;
use crate::elliptic::{MonotoneOptions, NewtonOptions, UpperLowerParams, CROSS_TOL};
use crate::error::{KwError, Result};
use crate::flow::{FlowConfig, Scheme, TimeStep};
use crate::manifold::{read_field_dump, DriftForm, Grid, GridSpec, ScalarField};
use crate::problem::ProblemData;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub exact: Option<String>,
    #[serde(default)]
    pub initial: Option<FieldSource>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub mms: MmsConfig,
    #[serde(default = "default_cross_tol")]
    pub cross_tol: f64,
    #[serde(skip)]
    base_dir: PathBuf,
}

fn default_cross_tol() -> f64 {
    CROSS_TOL
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(rename = "S", default)]
    pub s: Option<FieldSource>,
    #[serde(rename = "A")]
    pub a: FieldSource,
    #[serde(rename = "B", default)]
    pub b: Option<FieldSource>,
    #[serde(default)]
    pub theta: Option<DriftSource>,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum FieldSource {
    Value(f64),
    Expr(String),
    File { file: PathBuf },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum DriftSource {
    Components(Vec<FieldSource>),
    Stream { stream: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Flow,
    Newton,
    Monotone,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum DtSetting {
    Fixed(f64),
    Word(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub method: Method,
    pub scheme: Scheme,
    dt: DtSetting,
    pub residual_tol: f64,
    pub max_time: f64,
    pub trace_stride: usize,
    /// Newton residual tolerance and monotone step tolerance.
    pub tol: f64,
    pub max_iter: Option<usize>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub m: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let flow = FlowConfig::default();
        Self {
            method: Method::Newton,
            scheme: flow.scheme,
            dt: DtSetting::Word("auto".into()),
            residual_tol: flow.residual_tol,
            max_time: flow.max_time,
            trace_stride: flow.trace_stride,
            tol: NewtonOptions::default().tol,
            max_iter: None,
            a: None,
            b: None,
            m: None,
        }
    }
}

impl SolverConfig {
    pub fn flow(&self) -> Result<FlowConfig> {
        let dt = match &self.dt {
            DtSetting::Fixed(v) if *v > 0.0 => TimeStep::Fixed(*v),
            DtSetting::Word(w) if w == "auto" => TimeStep::Auto,
            _ => {
                return Err(KwError::InvalidArgument(
                    "solver.dt must be \"auto\" or a positive number".into(),
                ))
            }
        };
        Ok(FlowConfig {
            scheme: self.scheme,
            dt,
            residual_tol: self.residual_tol,
            max_time: self.max_time,
            trace_stride: self.trace_stride,
        })
    }

    pub fn newton(&self) -> NewtonOptions {
        let d = NewtonOptions::default();
        NewtonOptions {
            tol: self.tol,
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            ..d
        }
    }

    pub fn monotone(&self) -> MonotoneOptions {
        let d = MonotoneOptions::default();
        MonotoneOptions {
            tol: self.tol,
            max_iterations: self.max_iter.unwrap_or(d.max_iterations),
            ..d
        }
    }

    pub fn upper_lower(&self) -> UpperLowerParams {
        UpperLowerParams {
            a: self.a,
            b: self.b,
            m: self.m,
            ..UpperLowerParams::default()
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MmsConfig {
    pub sizes: Vec<usize>,
}

impl Default for MmsConfig {
    fn default() -> Self {
        Self {
            sizes: vec![16, 32, 64],
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| KwError::Io(format!("{}: {e}", path.display())))?;
        let mut config = Self::from_json(&text)?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(config)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| KwError::Parse(format!("config: {e}")))
    }

    pub fn build_grid(&self) -> Result<Grid> {
        Grid::new(self.grid.clone())
    }

    /// The same configuration on a grid with `n` points per axis.
    pub fn refined(&self, n: usize) -> Self {
        let mut c = self.clone();
        c.grid.points = vec![n; self.grid.points.len()];
        c
    }

    pub fn field(&self, grid: &Grid, source: &FieldSource) -> Result<ScalarField> {
        match source {
            FieldSource::Value(v) => ScalarField::new(grid, vec![*v; grid.node_count()]),
            FieldSource::Expr(text) => {
                let e = parse_for(grid, text)?;
                ScalarField::new(
                    grid,
                    (0..grid.node_count())
                        .map(|i| e.eval(&grid.coordinates(i)))
                        .collect(),
                )
                .map_err(|_| {
                    KwError::InvalidArgument(format!(
                        "expression {text:?} is not finite on the grid"
                    ))
                })
            }
            FieldSource::File { file } => {
                read_field_dump(&self.base_dir.join(file))?.into_field(grid)
            }
        }
    }

    pub fn drift(&self, grid: &Grid) -> Result<DriftForm> {
        match &self.problem.theta {
            None => Ok(DriftForm::zero(grid)),
            Some(DriftSource::Components(parts)) => {
                let fields = parts
                    .iter()
                    .map(|p| self.field(grid, p))
                    .collect::<Result<Vec<_>>>()?;
                DriftForm::from_components(grid, fields)
            }
            Some(DriftSource::Stream { stream }) => {
                DriftForm::from_stream(grid, &self.field(grid, &FieldSource::Expr(stream.clone()))?)
            }
        }
    }

    pub fn exact(&self, grid: &Grid) -> Result<Option<(Expr, ScalarField)>> {
        let Some(text) = &self.exact else {
            return Ok(None);
        };
        let e = parse_for(grid, text)?;
        let u = ScalarField::from_fn(grid, |x| e.eval(x));
        Ok(Some((e, u)))
    }

    pub fn initial(&self, grid: &Grid) -> Result<ScalarField> {
        match &self.initial {
            Some(source) => self.field(grid, source),
            None => Ok(ScalarField::zeros(grid)),
        }
    }

    pub fn build_problem(&self, grid: &Grid) -> Result<ProblemData> {
        let p = &self.problem;
        let a = self.field(grid, &p.a)?;
        let b = match &p.b {
            Some(source) => self.field(grid, source)?,
            None => ScalarField::zeros(grid),
        };
        let theta = self.drift(grid)?;
        let s = match (&p.s, self.exact(grid)?) {
            (Some(source), _) => self.field(grid, source)?,
            (None, Some((e, _))) => manufactured_source(grid, &e, &a, &b, p.alpha, p.beta, &theta)?,
            (None, None) => {
                return Err(KwError::InvalidArgument(
                    "problem.S is required unless \"exact\" is given".into(),
                ))
            }
        };
        ProblemData::new(grid.clone(), s, a, b, p.alpha, p.beta, theta)
    }
}

fn parse_for(grid: &Grid, text: &str) -> Result<Expr> {
    let e = Expr::parse(text)?;
    if e.arity() > grid.dim() {
        return Err(KwError::Parse(format!(
            "{text:?} uses coordinate x{} on a {}-dimensional grid",
            e.arity(),
            grid.dim()
        )));
    }
    Ok(e)
}

/// Continuum source `Δu* − θ·∇u* − A·e^{αu*} + B·e^{−βu*}` sampled at the
/// nodes, so the discrete solution differs from `u*` by the truncation error.
pub fn manufactured_source(
    grid: &Grid,
    exact: &Expr,
    a: &ScalarField,
    b: &ScalarField,
    alpha: f64,
    beta: f64,
    theta: &DriftForm,
) -> Result<ScalarField> {
    let dim = grid.dim();
    let gradient = (0..dim)
        .map(|i| exact.derivative(i))
        .collect::<Result<Vec<_>>>()?;
    let second = gradient
        .iter()
        .enumerate()
        .map(|(i, g)| g.derivative(i))
        .collect::<Result<Vec<_>>>()?;
    let values = (0..grid.node_count())
        .map(|n| {
            let x = grid.coordinates(n);
            let u = exact.eval(&x);
            let lap: f64 = second.iter().map(|d| d.eval(&x)).sum();
            let drift: f64 = (0..dim)
                .map(|i| theta.components()[i].values()[n] * gradient[i].eval(&x))
                .sum();
            lap - drift - a.values()[n] * (alpha * u).exp() + b.values()[n] * (-beta * u).exp()
        })
        .collect();
    ScalarField::new(grid, values).map_err(|_| {
        KwError::InvalidArgument("manufactured source is not finite on the grid".into())
    })
}
