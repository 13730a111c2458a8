//! Discrete flat tori: grids, node fields, divergence-free drift forms and
//! the finite-difference operators built on them.
//!
//! Every grid has unit volume, so integrals and means coincide. Operators use
//! second-order central differences with periodic wrap.

mod dump;
mod krylov;
mod ops;
mod spectral;

pub use dump::{read_field_dump, write_field_dump, FieldDump};
pub use krylov::{gmres, GmresOutcome};
pub use ops::{
    apply_l, divergence, drift_term, integrate, laplacian, lp_norm, max_divergence, solve_linear_l,
    solve_linear_l_with, LinearSolveOptions, Norm,
};
pub use spectral::{ConstCoeffOp, SpectralSolver};

use crate::error::{KwError, Result};

/// Tolerance for the product of periods against the unit volume.
const VOLUME_TOL: f64 = 1e-12;

/// Default bound on the discrete divergence of a drift form.
pub const DIV_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GridSpec {
    /// Number of nodes along each axis (`dim` entries, each at least 4).
    pub points: Vec<usize>,
    /// Period of each axis; their product must be 1.
    pub periods: Vec<f64>,
}

impl GridSpec {
    pub fn new(points: Vec<usize>, periods: Vec<f64>) -> Self {
        Self { points, periods }
    }

    /// Unit square/cube/interval with `n` nodes per axis.
    pub fn uniform(dim: usize, n: usize) -> Self {
        Self {
            points: vec![n; dim],
            periods: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.points.len()
    }
}

/// Node count per axis, padded to three axes with length 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    dims: [usize; 3],
    ndim: usize,
}

impl Shape {
    pub fn ndim(&self) -> usize {
        self.ndim
    }

    pub fn axis_len(&self, axis: usize) -> usize {
        self.dims[axis]
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims[..self.ndim]
    }

    pub fn node_count(&self) -> usize {
        self.dims.iter().product()
    }
}

#[derive(Debug, Clone)]
pub struct Grid {
    spec: GridSpec,
    shape: Shape,
    spacings: Vec<f64>,
    strides: Vec<usize>,
    node_weight: f64,
    /// `neighbors[axis][node] = [minus, plus]` with periodic wrap.
    neighbors: Vec<Vec<[usize; 2]>>,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        let dim = spec.dim();
        if !(1..=3).contains(&dim) {
            return Err(KwError::InvalidGrid(format!(
                "dimension {dim} not in 1..=3"
            )));
        }
        if spec.periods.len() != dim {
            return Err(KwError::InvalidGrid(format!(
                "{} periods given for a {dim}-dimensional grid",
                spec.periods.len()
            )));
        }
        if let Some(n) = spec.points.iter().find(|&&n| n < 4) {
            return Err(KwError::InvalidGrid(format!(
                "{n} points per axis, need at least 4"
            )));
        }
        if spec.periods.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
            return Err(KwError::InvalidGrid(
                "periods must be positive and finite".into(),
            ));
        }
        let volume: f64 = spec.periods.iter().product();
        if (volume - 1.0).abs() > VOLUME_TOL {
            return Err(KwError::InvalidGrid(format!("volume {volume} != 1")));
        }

        let mut dims = [1usize; 3];
        dims[..dim].copy_from_slice(&spec.points);
        let shape = Shape { dims, ndim: dim };

        let spacings: Vec<f64> = spec
            .points
            .iter()
            .zip(&spec.periods)
            .map(|(&n, &l)| l / n as f64)
            .collect();
        // Row-major: last axis contiguous.
        let mut strides = vec![1usize; dim];
        for axis in (0..dim.saturating_sub(1)).rev() {
            strides[axis] = strides[axis + 1] * spec.points[axis + 1];
        }
        let count = shape.node_count();
        let neighbors = (0..dim)
            .map(|axis| {
                let (n, s) = (spec.points[axis], strides[axis]);
                (0..count)
                    .map(|idx| {
                        let j = (idx / s) % n;
                        let minus = if j == 0 { idx + (n - 1) * s } else { idx - s };
                        let plus = if j + 1 == n {
                            idx - (n - 1) * s
                        } else {
                            idx + s
                        };
                        [minus, plus]
                    })
                    .collect()
            })
            .collect();

        Ok(Self {
            node_weight: 1.0 / count as f64,
            spec,
            shape,
            spacings,
            strides,
            neighbors,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn dim(&self) -> usize {
        self.shape.ndim
    }

    pub fn spacings(&self) -> &[f64] {
        &self.spacings
    }

    /// Quadrature weight of every node (`∏ h_i`, equal to `1 / node_count`).
    pub fn node_weight(&self) -> f64 {
        self.node_weight
    }

    pub fn node_count(&self) -> usize {
        self.shape.node_count()
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub(crate) fn neighbors(&self, axis: usize) -> &[[usize; 2]] {
        &self.neighbors[axis]
    }

    /// Multi-index of a flat node index.
    pub fn index_of(&self, node: usize) -> [usize; 3] {
        let mut out = [0usize; 3];
        for (axis, slot) in out.iter_mut().enumerate().take(self.dim()) {
            *slot = (node / self.strides[axis]) % self.spec.points[axis];
        }
        out
    }

    /// Physical coordinates `j_i * h_i` of a node.
    pub fn coordinates(&self, node: usize) -> [f64; 3] {
        let idx = self.index_of(node);
        let mut out = [0.0; 3];
        for axis in 0..self.dim() {
            out[axis] = idx[axis] as f64 * self.spacings[axis];
        }
        out
    }

    /// Largest step for which explicit Euler on the periodic Laplacian stays
    /// stable, with a 10% margin: `0.9 / Σ 2/h_i²`.
    pub fn explicit_dt_bound(&self) -> f64 {
        0.9 / self.spacings.iter().map(|h| 2.0 / (h * h)).sum::<f64>()
    }

    pub(crate) fn check(&self, field: &ScalarField) -> Result<()> {
        if field.shape != self.shape {
            return Err(KwError::GridMismatch {
                expected: self.node_count(),
                actual: field.values.len(),
            });
        }
        Ok(())
    }
}

/// Real values at the nodes of a grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    shape: Shape,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(KwError::GridMismatch {
                expected: grid.node_count(),
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(KwError::NonFinite("field construction"));
        }
        Ok(Self {
            shape: grid.shape(),
            values,
        })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        Self {
            shape: grid.shape(),
            values: vec![value; grid.node_count()],
        }
    }

    /// Samples `f` at the node coordinates (unused axes are passed as 0).
    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64; 3]) -> f64) -> Self {
        let values = (0..grid.node_count())
            .map(|node| f(&grid.coordinates(node)))
            .collect();
        Self {
            shape: grid.shape(),
            values,
        }
    }

    pub(crate) fn from_raw(shape: Shape, values: Vec<f64>) -> Self {
        debug_assert_eq!(shape.node_count(), values.len());
        Self { shape, values }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            shape: self.shape,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise combination; both fields must share a shape.
    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.same_shape(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self {
            shape: self.shape,
            values,
        })
    }

    /// `self - other`.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    /// `self + factor * other`, in place.
    pub fn add_scaled(&mut self, factor: f64, other: &Self) -> Result<()> {
        self.same_shape(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += factor * b;
        }
        Ok(())
    }

    /// Largest pointwise `|self - other|`.
    pub fn sup_distance(&self, other: &Self) -> Result<f64> {
        self.same_shape(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Moves a field to a new grid with the same node layout by cyclic shift of
    /// indices. Used for periodicity checks.
    pub fn shifted(&self, grid: &Grid, offset: [usize; 3]) -> Result<Self> {
        grid.check(self)?;
        let mut out = vec![0.0; self.values.len()];
        for (node, &v) in self.values.iter().enumerate() {
            let idx = grid.index_of(node);
            let mut target = 0;
            for axis in 0..grid.dim() {
                let n = grid.spec().points[axis];
                target += ((idx[axis] + offset[axis]) % n) * grid.strides()[axis];
            }
            out[target] = v;
        }
        Ok(Self {
            shape: self.shape,
            values: out,
        })
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(KwError::GridMismatch {
                expected: self.values.len(),
                actual: other.values.len(),
            });
        }
        Ok(())
    }
}

/// The drift 1-form θ as one component field per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftForm {
    components: Vec<ScalarField>,
    /// Set when every component is spatially constant.
    uniform: Option<Vec<f64>>,
}

impl DriftForm {
    pub fn zero(grid: &Grid) -> Self {
        Self::constant(grid, &vec![0.0; grid.dim()]).expect("dimension matches")
    }

    pub fn constant(grid: &Grid, value: &[f64]) -> Result<Self> {
        if value.len() != grid.dim() {
            return Err(KwError::InvalidArgument(format!(
                "{} drift components for a {}-dimensional grid",
                value.len(),
                grid.dim()
            )));
        }
        if value.iter().any(|v| !v.is_finite()) {
            return Err(KwError::NonFinite("drift construction"));
        }
        Ok(Self {
            components: value
                .iter()
                .map(|&c| ScalarField::constant(grid, c))
                .collect(),
            uniform: Some(value.to_vec()),
        })
    }

    /// Arbitrary component fields. Divergence is not checked here; see
    /// [`max_divergence`] and problem validation.
    pub fn from_components(grid: &Grid, components: Vec<ScalarField>) -> Result<Self> {
        if components.len() != grid.dim() {
            return Err(KwError::InvalidArgument(format!(
                "{} drift components for a {}-dimensional grid",
                components.len(),
                grid.dim()
            )));
        }
        for c in &components {
            grid.check(c)?;
        }
        let uniform = components
            .iter()
            .map(|c| {
                let first = c.values()[0];
                c.values().iter().all(|&v| v == first).then_some(first)
            })
            .collect::<Option<Vec<f64>>>();
        Ok(Self {
            components,
            uniform,
        })
    }

    /// Discrete curl `(D_y ψ, -D_x ψ)` of a stream field on a 2-torus. Its
    /// central-difference divergence vanishes up to rounding.
    pub fn from_stream(grid: &Grid, stream: &ScalarField) -> Result<Self> {
        if grid.dim() != 2 {
            return Err(KwError::InvalidArgument(
                "stream-function drift requires a 2-dimensional grid".into(),
            ));
        }
        grid.check(stream)?;
        let dx = ops::central_difference(grid, stream, 0);
        let dy = ops::central_difference(grid, stream, 1);
        Self::from_components(grid, vec![dy, dx.map(|v| -v)])
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    /// The constant value when θ is spatially uniform.
    pub fn uniform_value(&self) -> Option<&[f64]> {
        self.uniform.as_deref()
    }

    pub fn is_zero(&self) -> bool {
        self.uniform
            .as_ref()
            .is_some_and(|u| u.iter().all(|&v| v == 0.0))
    }

    /// Componentwise mean, the constant part of θ.
    pub fn mean(&self, grid: &Grid) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| integrate(grid, c).unwrap_or(0.0))
            .collect()
    }
}
