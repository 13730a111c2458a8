use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::Grid;

/// Constant-coefficient operator `identity·u + laplacian·Δu + Σ gradient_i·D_i u`
/// where `Δ` is the compact periodic stencil and `D_i` the central difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstCoeffOp {
    pub identity: f64,
    pub laplacian: f64,
    pub gradient: [f64; 3],
}

impl ConstCoeffOp {
    /// `L = Δ − θ·D` for a uniform θ.
    pub fn l_operator(theta: &[f64]) -> Self {
        let mut gradient = [0.0; 3];
        for (g, t) in gradient.iter_mut().zip(theta) {
            *g = -t;
        }
        Self {
            identity: 0.0,
            laplacian: 1.0,
            gradient,
        }
    }

    /// `shift·I + scale·L` for a uniform θ.
    pub fn shifted_l(shift: f64, scale: f64, theta: &[f64]) -> Self {
        let mut op = Self::l_operator(theta);
        op.identity = shift;
        op.laplacian *= scale;
        for g in op.gradient.iter_mut() {
            *g *= scale;
        }
        op
    }
}

/// Direct solver for constant-coefficient operators, diagonal in the discrete
/// Fourier basis of the periodic grid.
pub struct SpectralSolver {
    dims: Vec<usize>,
    strides: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    /// Eigenvalue of the compact Laplacian per mode.
    lap_symbol: Vec<f64>,
    /// `sin(2πk_i/N_i)/h_i` per mode and axis; `D_i` has eigenvalue `i·s_i`.
    grad_symbol: Vec<[f64; 3]>,
}

impl SpectralSolver {
    pub fn new(grid: &Grid) -> Self {
        let dims = grid.spec().points.clone();
        let mut planner = FftPlanner::<f64>::new();
        let forward = dims.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse = dims.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        let count = grid.node_count();
        let h = grid.spacings();
        let mut lap_symbol = vec![0.0; count];
        let mut grad_symbol = vec![[0.0; 3]; count];
        for node in 0..count {
            let idx = grid.index_of(node);
            for axis in 0..dims.len() {
                let omega = 2.0 * std::f64::consts::PI * idx[axis] as f64 / dims[axis] as f64;
                let half = (0.5 * omega).sin();
                lap_symbol[node] -= 4.0 * half * half / (h[axis] * h[axis]);
                grad_symbol[node][axis] = omega.sin() / h[axis];
            }
        }
        Self {
            dims,
            strides: grid.strides().to_vec(),
            forward,
            inverse,
            lap_symbol,
            grad_symbol,
        }
    }

    fn symbol(&self, op: &ConstCoeffOp, mode: usize) -> Complex<f64> {
        let g = &self.grad_symbol[mode];
        let im: f64 = (0..self.dims.len()).map(|a| op.gradient[a] * g[a]).sum();
        Complex::new(op.identity + op.laplacian * self.lap_symbol[mode], im)
    }

    /// Solves `op(x) = rhs`. Modes where the symbol vanishes (the constant
    /// mode of `L`) are set to zero, giving the minimum-norm solution.
    pub fn solve(&self, op: &ConstCoeffOp, rhs: &[f64]) -> Vec<f64> {
        let mut data: Vec<Complex<f64>> = rhs.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.transform(&mut data, false);
        let scale = 1.0 / data.len() as f64;
        for (mode, c) in data.iter_mut().enumerate() {
            let s = self.symbol(op, mode);
            *c = if s.norm() <= 1e-300 {
                Complex::new(0.0, 0.0)
            } else {
                *c / s * scale
            };
        }
        self.transform(&mut data, true);
        data.into_iter().map(|c| c.re).collect()
    }

    fn transform(&self, data: &mut [Complex<f64>], inverse: bool) {
        let count = data.len();
        for axis in 0..self.dims.len() {
            let (n, stride) = (self.dims[axis], self.strides[axis]);
            let plan = if inverse {
                &self.inverse[axis]
            } else {
                &self.forward[axis]
            };
            let mut line = vec![Complex::new(0.0, 0.0); n];
            let mut scratch = vec![Complex::new(0.0, 0.0); plan.get_inplace_scratch_len()];
            for base in (0..count).filter(|&b| (b / stride) % n == 0) {
                for (j, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + j * stride];
                }
                plan.process_with_scratch(&mut line, &mut scratch);
                for (j, value) in line.iter().enumerate() {
                    data[base + j * stride] = *value;
                }
            }
        }
    }
}
