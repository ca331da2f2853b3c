use nalgebra::DMatrix;

use crate::error::GeometryError;

use super::metric::MetricField;

/// Levi-Civita connection coefficients `Γ^k_lm` at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    dim: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, k: usize, l: usize, m: usize) -> f64 {
        self.data[(k * self.dim + l) * self.dim + m]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Reusable buffers for connection evaluation.
#[derive(Debug, Clone)]
pub(crate) struct Scratch {
    pub g: Vec<f64>,
    pub ginv: Vec<f64>,
    pub dg: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl Scratch {
    pub fn new(n: usize) -> Self {
        Self { g: vec![0.0; n * n], ginv: vec![0.0; n * n], dg: vec![0.0; n * n * n], gamma: vec![0.0; n * n * n] }
    }
}

fn invert(g: &[f64], n: usize, out: &mut [f64]) {
    if n == 1 {
        out[0] = 1.0 / g[0];
    } else if n == 2 {
        let det = g[0] * g[3] - g[1] * g[2];
        out[0] = g[3] / det;
        out[1] = -g[1] / det;
        out[2] = -g[2] / det;
        out[3] = g[0] / det;
    } else {
        let inv = DMatrix::from_row_slice(n, n, g)
            .try_inverse()
            .expect("interpolated metric is clamped positive definite");
        for a in 0..n {
            for b in 0..n {
                out[a * n + b] = inv[(a, b)];
            }
        }
    }
}

/// Fills `s.gamma` with `Γ^k_lm` at `x`, laid out `[(k N + l) N + m]`.
pub(crate) fn christoffel_into(field: &MetricField, x: &[f64], s: &mut Scratch) -> Result<(), GeometryError> {
    let n = field.dim();
    field.eval(x, &mut s.g, Some(&mut s.dg))?;
    invert(&s.g, n, &mut s.ginv);
    let dg = |a: usize, b: usize, c: usize| s.dg[(a * n + b) * n + c];
    for k in 0..n {
        for l in 0..n {
            for m in l..n {
                let mut acc = 0.0;
                for p in 0..n {
                    acc += s.ginv[k * n + p] * (dg(p, m, l) + dg(p, l, m) - dg(l, m, p));
                }
                let v = 0.5 * acc;
                s.gamma[(k * n + l) * n + m] = v;
                s.gamma[(k * n + m) * n + l] = v;
            }
        }
    }
    Ok(())
}

/// `Γ^k_lm = ½ g^kn (∂_l g_nm + ∂_m g_nl − ∂_n g_lm)` from the interpolant's
/// analytic derivatives.
pub fn christoffel(field: &MetricField, x: &[f64]) -> Result<Christoffel, GeometryError> {
    let mut s = Scratch::new(field.dim());
    christoffel_into(field, x, &mut s)?;
    Ok(Christoffel { dim: field.dim(), data: s.gamma })
}

/// Scalar curvature `R` (twice the Gaussian curvature) of a 2-D field.
///
/// Derivatives of `Γ` are central differences with step `1e-3` of the finest
/// grid spacing, so `x` must sit at least that far inside the domain.
pub fn curvature_scalar(field: &MetricField, x: &[f64]) -> Result<f64, GeometryError> {
    let n = field.dim();
    if n != 2 {
        return Err(GeometryError::UnsupportedDimension(n));
    }
    let h = 1e-3 * field.grid().min_spacing();
    let mut s = Scratch::new(n);
    // dgamma[c][(k n + l) n + m] = ∂_c Γ^k_lm
    let mut dgamma = vec![vec![0.0; n * n * n]; n];
    let mut probe = x.to_vec();
    for c in 0..n {
        probe[c] = x[c] + h;
        christoffel_into(field, &probe, &mut s).map_err(|_| GeometryError::OutOfDomain { point: x.to_vec() })?;
        let plus = s.gamma.clone();
        probe[c] = x[c] - h;
        christoffel_into(field, &probe, &mut s).map_err(|_| GeometryError::OutOfDomain { point: x.to_vec() })?;
        for (d, (p, m)) in dgamma[c].iter_mut().zip(plus.iter().zip(&s.gamma)) {
            *d = (p - m) / (2.0 * h);
        }
        probe[c] = x[c];
    }
    christoffel_into(field, x, &mut s)?;
    let gamma = |k: usize, l: usize, m: usize| s.gamma[(k * n + l) * n + m];
    let dgam = |c: usize, k: usize, l: usize, m: usize| dgamma[c][(k * n + l) * n + m];

    // R^r_{s mu nu} = ∂_mu Γ^r_{nu s} − ∂_nu Γ^r_{mu s} + Γ^r_{mu l} Γ^l_{nu s} − Γ^r_{nu l} Γ^l_{mu s}
    let riemann = |r: usize, sg: usize, mu: usize, nu: usize| {
        let mut v = dgam(mu, r, nu, sg) - dgam(nu, r, mu, sg);
        for l in 0..n {
            v += gamma(r, mu, l) * gamma(l, nu, sg) - gamma(r, nu, l) * gamma(l, mu, sg);
        }
        v
    };
    let mut scalar = 0.0;
    for sg in 0..n {
        for nu in 0..n {
            let ricci: f64 = (0..n).map(|r| riemann(r, sg, r, nu)).sum();
            scalar += s.ginv[sg * n + nu] * ricci;
        }
    }
    Ok(scalar)
}
