use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;
use crate::trajectory::FeatureTrajectory;

/// Per-axis strictly increasing warp `c + alpha x + beta tanh(gamma x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisWarp {
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl AxisWarp {
    pub fn identity() -> Self {
        Self { c: 0.0, alpha: 1.0, beta: 0.0, gamma: 0.0 }
    }

    pub fn apply(&self, x: f64) -> f64 {
        self.c + self.alpha * x + self.beta * (self.gamma * x).tanh()
    }

    /// Bounds of the derivative `alpha + beta gamma sech^2(gamma x)` over
    /// the real line.
    pub fn slope_bounds(&self) -> (f64, f64) {
        let bump = self.beta * self.gamma;
        (self.alpha + bump.min(0.0), self.alpha + bump.max(0.0))
    }

    /// Inverse by bisection. Since `|beta tanh| <= |beta|`, the preimage of
    /// `y` lies within `|beta| / alpha` of `(y - c) / alpha`.
    pub fn invert(&self, y: f64) -> f64 {
        let center = (y - self.c) / self.alpha;
        let reach = self.beta.abs() / self.alpha;
        let (mut lo, mut hi) = (center - reach, center + reach);
        if reach == 0.0 {
            return center;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.apply(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// An invertible, time-independent map of feature space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Transform {
    /// `x -> A x + b`.
    Linear {
        matrix: Vec<Vec<f64>>,
        #[serde(default)]
        offset: Option<Vec<f64>>,
    },
    MonotoneWarp { axes: Vec<AxisWarp> },
    /// Steps applied first to last.
    Composite { steps: Vec<Transform> },
}

/// A transform plus the box on which it is declared valid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformSpec {
    pub map: Transform,
    /// Per-axis `(lo, hi)`; unbounded when absent.
    #[serde(default)]
    pub valid_box: Option<Vec<(f64, f64)>>,
}

/// Upper bound on the Jacobian condition number accepted by validation.
pub const MAX_JACOBIAN_CONDITION: f64 = 1e3;

impl Transform {
    pub fn identity(n: usize) -> Self {
        Transform::MonotoneWarp { axes: vec![AxisWarp::identity(); n] }
    }

    /// Dimension of the map, or `None` for an empty composite.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Transform::Linear { matrix, .. } => Some(matrix.len()),
            Transform::MonotoneWarp { axes } => Some(axes.len()),
            Transform::Composite { steps } => steps.first().and_then(Transform::dim),
        }
    }

    /// Upper bound on the Jacobian condition number anywhere.
    pub fn condition_bound(&self) -> f64 {
        match self {
            Transform::Linear { matrix, .. } => {
                let n = matrix.len();
                let sv = DMatrix::from_fn(n, n, |r, c| matrix[r][c]).singular_values();
                if sv.min() > 0.0 {
                    sv.max() / sv.min()
                } else {
                    f64::INFINITY
                }
            }
            Transform::MonotoneWarp { axes } => {
                let lo = axes.iter().map(|a| a.slope_bounds().0).fold(f64::INFINITY, f64::min);
                let hi = axes.iter().map(|a| a.slope_bounds().1).fold(0.0, f64::max);
                if lo > 0.0 {
                    hi / lo
                } else {
                    f64::INFINITY
                }
            }
            Transform::Composite { steps } => steps.iter().map(Transform::condition_bound).product(),
        }
    }

    pub fn validate(&self) -> Result<usize, HarnessError> {
        let n = self.dim().ok_or_else(|| HarnessError::InvalidTransform("empty composite".into()))?;
        match self {
            Transform::Linear { matrix, offset } => {
                if n == 0 || matrix.iter().any(|row| row.len() != n) {
                    return Err(HarnessError::InvalidTransform("matrix must be square and nonempty".into()));
                }
                if offset.as_ref().is_some_and(|b| b.len() != n) {
                    return Err(HarnessError::InvalidTransform("offset length differs from matrix size".into()));
                }
                if matrix.iter().flatten().chain(offset.iter().flatten()).any(|v| !v.is_finite()) {
                    return Err(HarnessError::InvalidTransform("non-finite matrix entry".into()));
                }
            }
            Transform::MonotoneWarp { axes } => {
                if n == 0 {
                    return Err(HarnessError::InvalidTransform("warp needs at least one axis".into()));
                }
                for (k, a) in axes.iter().enumerate() {
                    if ![a.c, a.alpha, a.beta, a.gamma].iter().all(|v| v.is_finite()) || !(a.alpha > 0.0) {
                        return Err(HarnessError::InvalidTransform(format!("axis {k}: alpha must be positive")));
                    }
                    if !(a.slope_bounds().0 > 0.0) {
                        return Err(HarnessError::InvalidTransform(format!(
                            "axis {k}: alpha + beta gamma must be positive for a monotone warp"
                        )));
                    }
                }
            }
            Transform::Composite { steps } => {
                for step in steps {
                    if step.validate()? != n {
                        return Err(HarnessError::InvalidTransform("composite steps differ in dimension".into()));
                    }
                }
            }
        }
        let cond = self.condition_bound();
        if !(cond < MAX_JACOBIAN_CONDITION) {
            return Err(HarnessError::InvalidTransform(format!(
                "Jacobian condition bound {cond:e} exceeds {MAX_JACOBIAN_CONDITION:e}"
            )));
        }
        Ok(n)
    }

    pub fn apply_point(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Transform::Linear { matrix, offset } => matrix
                .iter()
                .enumerate()
                .map(|(r, row)| {
                    row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + offset.as_ref().map_or(0.0, |b| b[r])
                })
                .collect(),
            Transform::MonotoneWarp { axes } => axes.iter().zip(x).map(|(a, v)| a.apply(*v)).collect(),
            Transform::Composite { steps } => steps.iter().fold(x.to_vec(), |p, step| step.apply_point(&p)),
        }
    }

    pub fn invert_point(&self, y: &[f64]) -> Vec<f64> {
        match self {
            Transform::Linear { matrix, offset } => {
                let n = matrix.len();
                let a = DMatrix::from_fn(n, n, |r, c| matrix[r][c]);
                let rhs = DVector::from_fn(n, |r, _| y[r] - offset.as_ref().map_or(0.0, |b| b[r]));
                let x = a.lu().solve(&rhs).unwrap_or_else(|| DVector::from_element(n, f64::NAN));
                x.iter().copied().collect()
            }
            Transform::MonotoneWarp { axes } => axes.iter().zip(y).map(|(a, v)| a.invert(*v)).collect(),
            Transform::Composite { steps } => steps.iter().rev().fold(y.to_vec(), |p, step| step.invert_point(&p)),
        }
    }
}

impl TransformSpec {
    pub fn new(map: Transform) -> Self {
        Self { map, valid_box: None }
    }

    pub fn with_box(map: Transform, valid_box: Vec<(f64, f64)>) -> Self {
        Self { map, valid_box: Some(valid_box) }
    }

    pub fn validate(&self) -> Result<usize, HarnessError> {
        let n = self.map.validate()?;
        if let Some(b) = &self.valid_box {
            if b.len() != n || b.iter().any(|(l, h)| !(l < h)) {
                return Err(HarnessError::InvalidTransform("valid box must give lo < hi for every axis".into()));
            }
        }
        Ok(n)
    }

    fn check_box(&self, index: usize, x: &[f64]) -> Result<(), HarnessError> {
        match &self.valid_box {
            Some(b) if b.iter().zip(x).any(|((l, h), v)| v < l || v > h) => {
                Err(HarnessError::OutOfBox { index, point: x.to_vec() })
            }
            _ => Ok(()),
        }
    }
}

/// Applies the transform pointwise; times are untouched.
pub fn apply_transform(traj: &FeatureTrajectory, spec: &TransformSpec) -> Result<FeatureTrajectory, HarnessError> {
    let n = spec.validate()?;
    if n != traj.dim() {
        return Err(HarnessError::DimensionMismatch { expected: n, got: traj.dim() });
    }
    for (i, p) in traj.points().enumerate() {
        spec.check_box(i, p)?;
    }
    Ok(traj.map_points(n, |p| spec.map.apply_point(p))?)
}

/// Inverse of [`apply_transform`]; the valid box is checked on the output.
pub fn invert_transform(traj: &FeatureTrajectory, spec: &TransformSpec) -> Result<FeatureTrajectory, HarnessError> {
    let n = spec.validate()?;
    if n != traj.dim() {
        return Err(HarnessError::DimensionMismatch { expected: n, got: traj.dim() });
    }
    let out = traj.map_points(n, |p| spec.map.invert_point(p))?;
    for (i, p) in out.points().enumerate() {
        spec.check_box(i, p)?;
    }
    Ok(out)
}
