//! Restarted GMRES with right preconditioning.
//!
//! Convergence is judged on the sup-norm of the true residual `b - A x`,
//! recomputed at every restart. The inner least-squares estimate uses the
//! unweighted Euclidean norm, which dominates the sup-norm.

#[derive(Debug, Clone)]
pub struct GmresOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    /// Sup-norm of the true residual of `solution`.
    pub residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn sup(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn gmres(
    op: &dyn Fn(&[f64]) -> Vec<f64>,
    precond: &dyn Fn(&[f64]) -> Vec<f64>,
    rhs: &[f64],
    initial: Option<&[f64]>,
    tol: f64,
    restart: usize,
    max_iterations: usize,
) -> GmresOutcome {
    let n = rhs.len();
    let restart = restart.max(1);
    let mut x = initial.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut iterations = 0;
    let mut last_residual = f64::INFINITY;

    loop {
        let ax = op(&x);
        let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let res_sup = sup(&r);
        if res_sup <= tol {
            return GmresOutcome {
                solution: x,
                iterations,
                residual: res_sup,
                converged: true,
            };
        }
        // A full cycle that fails to shrink the residual means rounding has
        // taken over.
        if iterations >= max_iterations || res_sup >= last_residual * 0.999 {
            return GmresOutcome {
                solution: x,
                iterations,
                residual: res_sup,
                converged: false,
            };
        }
        last_residual = res_sup;

        let beta = norm2(&r);
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut directions: Vec<Vec<f64>> = Vec::with_capacity(restart);
        // Hessenberg columns after rotation.
        let mut hess: Vec<Vec<f64>> = Vec::with_capacity(restart);
        let mut cs: Vec<f64> = Vec::with_capacity(restart);
        let mut sn: Vec<f64> = Vec::with_capacity(restart);
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;

        for j in 0..restart {
            iterations += 1;
            let z = precond(&basis[j]);
            let mut w = op(&z);
            directions.push(z);

            let mut h = vec![0.0; j + 2];
            for (i, v) in basis.iter().enumerate() {
                h[i] = dot(&w, v);
                for (wk, vk) in w.iter_mut().zip(v) {
                    *wk -= h[i] * vk;
                }
            }
            h[j + 1] = norm2(&w);

            for i in 0..j {
                let t = cs[i] * h[i] + sn[i] * h[i + 1];
                h[i + 1] = -sn[i] * h[i] + cs[i] * h[i + 1];
                h[i] = t;
            }
            let denom = h[j].hypot(h[j + 1]);
            let (c, s) = if denom == 0.0 {
                (1.0, 0.0)
            } else {
                (h[j] / denom, h[j + 1] / denom)
            };
            cs.push(c);
            sn.push(s);
            let next_norm = h[j + 1];
            h[j] = c * h[j] + s * h[j + 1];
            h[j + 1] = 0.0;
            g[j + 1] = -s * g[j];
            g[j] *= c;
            hess.push(h);

            let estimate = g[j + 1].abs();
            if estimate <= 0.5 * tol || next_norm <= 1e-300 || iterations >= max_iterations {
                break;
            }
            basis.push(w.iter().map(|v| v / next_norm).collect());
        }

        // Back substitution on the rotated triangular system.
        let k = hess.len();
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut acc = g[i];
            for (l, yl) in y.iter().enumerate().take(k).skip(i + 1) {
                acc -= hess[l][i] * yl;
            }
            y[i] = if hess[i][i] == 0.0 {
                0.0
            } else {
                acc / hess[i][i]
            };
        }
        for (yi, z) in y.iter().zip(&directions) {
            for (xk, zk) in x.iter_mut().zip(z) {
                *xk += yi * zk;
            }
        }
    }
}
