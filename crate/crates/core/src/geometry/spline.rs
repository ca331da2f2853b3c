//! Tensor-product uniform cubic B-spline interpolation with not-a-knot ends.
//!
//! Each axis with `n` nodes carries `n + 2` coefficients. Coefficients are
//! found one axis at a time by applying a precomputed `(n + 2) × n` solve
//! matrix to every grid line, so the interpolant reproduces the samples at
//! the nodes and is exact for cubic polynomials along each axis.

use nalgebra::DMatrix;

#[derive(Debug, Clone)]
pub(crate) struct TensorSpline {
    dim: usize,
    ncomp: usize,
    origin: Vec<f64>,
    spacing: Vec<f64>,
    /// Nodes per axis.
    nodes: Vec<usize>,
    /// Coefficient strides (in coefficient-node units) per axis.
    strides: Vec<usize>,
    /// `ncomp` values per coefficient node, row-major over `nodes[i] + 2`.
    coeffs: Vec<f64>,
}

/// Rows of the linear map from node values to B-spline coefficients.
fn solve_matrix(n: usize) -> DMatrix<f64> {
    assert!(n >= 2);
    let m = n + 2;
    let mut a = DMatrix::<f64>::zeros(m, m);
    // Unknowns c_{-1} .. c_n live at columns 0 .. n + 1.
    for i in 0..n {
        a[(i, i)] = 1.0 / 6.0;
        a[(i, i + 1)] = 4.0 / 6.0;
        a[(i, i + 2)] = 1.0 / 6.0;
    }
    match n {
        2 => {
            // Zero second derivative at both ends: straight line.
            a[(n, 0)] = 1.0;
            a[(n, 1)] = -2.0;
            a[(n, 2)] = 1.0;
            a[(n + 1, 1)] = 1.0;
            a[(n + 1, 2)] = -2.0;
            a[(n + 1, 3)] = 1.0;
        }
        3 => {
            // Zero third derivative on both segments: one parabola.
            for (row, start) in [(n, 0), (n + 1, 1)] {
                a[(row, start)] = -1.0;
                a[(row, start + 1)] = 3.0;
                a[(row, start + 2)] = -3.0;
                a[(row, start + 3)] = 1.0;
            }
        }
        _ => {
            // Continuous third derivative across knots 1 and n - 2.
            for (row, start) in [(n, 0), (n + 1, n - 3)] {
                for (k, w) in [1.0, -4.0, 6.0, -4.0, 1.0].into_iter().enumerate() {
                    a[(row, start + k)] = w;
                }
            }
        }
    }
    let inv = a.try_inverse().expect("B-spline interpolation system is nonsingular");
    inv.columns(0, n).into_owned()
}

fn row_major_strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * shape[i + 1];
    }
    strides
}

impl TensorSpline {
    /// `values` holds `ncomp` entries per node, nodes row-major with the last
    /// axis fastest.
    pub(crate) fn new(origin: Vec<f64>, spacing: Vec<f64>, nodes: Vec<usize>, ncomp: usize, values: &[f64]) -> Self {
        let dim = nodes.len();
        let total: usize = nodes.iter().product();
        assert_eq!(values.len(), total * ncomp);

        // Expand one axis at a time from `nodes` to `nodes + 2`.
        let mut shape = nodes.clone();
        let mut data = values.to_vec();
        for axis in 0..dim {
            let n = shape[axis];
            let solve = solve_matrix(n);
            let mut new_shape = shape.clone();
            new_shape[axis] = n + 2;
            let old_strides = row_major_strides(&shape);
            let new_strides = row_major_strides(&new_shape);
            let new_total: usize = new_shape.iter().product();
            let mut out = vec![0.0; new_total * ncomp];
            let lines: usize = shape.iter().enumerate().filter(|&(a, _)| a != axis).map(|(_, &c)| c).product();
            let mut idx = vec![0usize; dim];
            for _ in 0..lines {
                let base_old: usize = idx.iter().zip(&old_strides).map(|(i, s)| i * s).sum();
                let base_new: usize = idx.iter().zip(&new_strides).map(|(i, s)| i * s).sum();
                for c in 0..ncomp {
                    for r in 0..n + 2 {
                        let mut acc = 0.0;
                        for j in 0..n {
                            acc += solve[(r, j)] * data[(base_old + j * old_strides[axis]) * ncomp + c];
                        }
                        out[(base_new + r * new_strides[axis]) * ncomp + c] = acc;
                    }
                }
                // Advance the multi-index over every axis except `axis`.
                for a in (0..dim).rev() {
                    if a == axis {
                        continue;
                    }
                    idx[a] += 1;
                    if idx[a] < shape[a] {
                        break;
                    }
                    idx[a] = 0;
                }
            }
            shape = new_shape;
            data = out;
        }
        let strides = row_major_strides(&shape);
        Self { dim, ncomp, origin, spacing, nodes, strides, coeffs: data }
    }

    pub(crate) fn ncomp(&self) -> usize {
        self.ncomp
    }

    /// Evaluates every component at `x`, and optionally its gradient laid out
    /// as `grad[comp * dim + axis]`.
    pub(crate) fn eval(&self, x: &[f64], values: &mut [f64], mut grad: Option<&mut [f64]>) {
        const MAX_DIM: usize = 8;
        assert!(self.dim <= MAX_DIM, "spline dimension above {MAX_DIM}");
        let mut cell = [0usize; MAX_DIM];
        let mut w = [[0.0f64; 4]; MAX_DIM];
        let mut dw = [[0.0f64; 4]; MAX_DIM];
        for a in 0..self.dim {
            let u = (x[a] - self.origin[a]) / self.spacing[a];
            let i = (u.floor().max(0.0) as usize).min(self.nodes[a] - 2);
            let t = u - i as f64;
            let s = 1.0 - t;
            cell[a] = i;
            w[a] = [
                s * s * s / 6.0,
                (3.0 * t * t * t - 6.0 * t * t + 4.0) / 6.0,
                (-3.0 * t * t * t + 3.0 * t * t + 3.0 * t + 1.0) / 6.0,
                t * t * t / 6.0,
            ];
            let h = self.spacing[a];
            dw[a] = [
                -s * s / (2.0 * h),
                (3.0 * t * t - 4.0 * t) / (2.0 * h),
                (-3.0 * t * t + 2.0 * t + 1.0) / (2.0 * h),
                t * t / (2.0 * h),
            ];
        }
        values.iter_mut().for_each(|v| *v = 0.0);
        if let Some(g) = grad.as_deref_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
        let want_grad = grad.is_some();
        let stencil = 1usize << (2 * self.dim);
        for combo in 0..stencil {
            let mut offset = 0;
            let mut weight = 1.0;
            let mut code = combo;
            let mut digits = [0usize; MAX_DIM];
            for a in 0..self.dim {
                let d = code & 3;
                code >>= 2;
                digits[a] = d;
                offset += (cell[a] + d) * self.strides[a];
                weight *= w[a][d];
            }
            let base = offset * self.ncomp;
            let coeffs = &self.coeffs[base..base + self.ncomp];
            for (v, c) in values.iter_mut().zip(coeffs) {
                *v += weight * c;
            }
            if want_grad {
                let g = grad.as_deref_mut().unwrap();
                for a in 0..self.dim {
                    let mut dweight = dw[a][digits[a]];
                    for b in 0..self.dim {
                        if b != a {
                            dweight *= w[b][digits[b]];
                        }
                    }
                    for (c, coef) in coeffs.iter().enumerate() {
                        g[c * self.dim + a] += dweight * coef;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn build(f: impl Fn(f64, f64) -> f64, nx: usize, ny: usize, h: f64) -> TensorSpline {
        let mut vals = Vec::new();
        for i in 0..nx {
            for j in 0..ny {
                vals.push(f(i as f64 * h, j as f64 * h));
            }
        }
        TensorSpline::new(vec![0.0, 0.0], vec![h, h], vec![nx, ny], 1, &vals)
    }

    fn at(s: &TensorSpline, x: f64, y: f64) -> (f64, [f64; 2]) {
        let mut v = [0.0];
        let mut g = [0.0; 2];
        s.eval(&[x, y], &mut v, Some(&mut g));
        (v[0], g)
    }

    #[test]
    fn reproduces_nodes() {
        let f = |x: f64, y: f64| (x * 1.3).sin() * (0.7 * y).cos() + x * y;
        for (nx, ny) in [(2, 2), (3, 5), (7, 9)] {
            let s = build(f, nx, ny, 0.5);
            for i in 0..nx {
                for j in 0..ny {
                    let (x, y) = (i as f64 * 0.5, j as f64 * 0.5);
                    assert!((at(&s, x, y).0 - f(x, y)).abs() < 1e-12, "{nx}x{ny} node {i},{j}");
                }
            }
        }
    }

    #[test]
    fn exact_for_bicubic_polynomials() {
        let f = |x: f64, y: f64| 1.0 + x - 2.0 * y + x * x * y + 0.3 * x.powi(3) - y.powi(3) * x;
        let s = build(f, 6, 5, 0.4);
        for &(x, y) in &[(0.13, 0.77), (1.9, 1.55), (0.0, 1.6), (2.0, 0.05)] {
            let (v, g) = at(&s, x, y);
            assert!((v - f(x, y)).abs() < 1e-11);
            let fx = 1.0 + 2.0 * x * y + 0.9 * x * x - y.powi(3);
            let fy = -2.0 + x * x - 3.0 * y * y * x;
            assert!((g[0] - fx).abs() < 1e-10 && (g[1] - fy).abs() < 1e-10);
        }
    }

    #[test]
    fn quadratic_on_three_nodes_and_linear_on_two() {
        let s = build(|x, y| x * x + y, 3, 2, 1.0);
        let (v, g) = at(&s, 0.5, 0.25);
        assert!((v - 0.5).abs() < 1e-12);
        assert!((g[0] - 1.0).abs() < 1e-12 && (g[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fourth_order_convergence_mid_cell() {
        let f = |x: f64, y: f64| (x).sin() * (y).exp();
        let err = |n: usize| {
            let h = 2.0 / (n - 1) as f64;
            let s = build(f, n, n, h);
            let (x, y) = (1.0 + 0.5 * h, 1.0 + 0.5 * h);
            (at(&s, x, y).0 - f(x, y)).abs()
        };
        let (e1, e2) = (err(11), err(21));
        assert!(e1 / e2 > 10.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let s = build(|x, y| (x * y).sin() + y * y, 8, 8, 0.3);
        let (x, y) = (0.77, 1.31);
        let (_, g) = at(&s, x, y);
        let d = 1e-6;
        let fx = (at(&s, x + d, y).0 - at(&s, x - d, y).0) / (2.0 * d);
        let fy = (at(&s, x, y + d).0 - at(&s, x, y - d).0) / (2.0 * d);
        assert!((g[0] - fx).abs() < 1e-7 && (g[1] - fy).abs() < 1e-7);
    }
}
