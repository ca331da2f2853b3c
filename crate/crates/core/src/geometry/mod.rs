//! Metric estimation from trajectory velocities and the Riemannian machinery
//! built on it: Levi-Civita connection, geodesics, parallel transport and
//! scalar curvature.

mod connection;
mod geodesic;
mod metric;
mod spline;

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;
use crate::trajectory::FeatureTrajectory;

pub use connection::{christoffel, curvature_scalar, Christoffel};
pub use geodesic::{integrate_geodesic, parallel_transport, GeodesicState};
pub use metric::{
    estimate_metric_grid, estimate_metric_grid_with, metric_at, MetricEstimation, MetricField, METRIC_FORMAT_VERSION,
};

/// A rectangular lattice of `counts[i]` nodes per axis starting at `origin`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub origin: Vec<f64>,
    pub spacing: Vec<f64>,
    pub counts: Vec<usize>,
}

impl GridSpec {
    pub fn new(origin: Vec<f64>, spacing: Vec<f64>, counts: Vec<usize>) -> Result<Self, GeometryError> {
        let grid = Self { origin, spacing, counts };
        grid.validate()?;
        Ok(grid)
    }

    /// Grid whose corner nodes sit exactly at `lo` and `hi`.
    pub fn covering(lo: &[f64], hi: &[f64], counts: &[usize]) -> Result<Self, GeometryError> {
        if lo.len() != hi.len() || lo.len() != counts.len() {
            return Err(GeometryError::InvalidGrid("lo, hi and counts differ in length".into()));
        }
        let spacing = lo
            .iter()
            .zip(hi)
            .zip(counts)
            .map(|((l, h), &c)| (h - l) / (c.max(2) - 1) as f64)
            .collect();
        Self::new(lo.to_vec(), spacing, counts.to_vec())
    }

    /// Grid over the central `mass_fraction` of the trajectory on each axis
    /// (per-axis quantiles `(1 - f)/2` and `(1 + f)/2`).
    pub fn fit_to_mass(traj: &FeatureTrajectory, counts: &[usize], mass_fraction: f64) -> Result<Self, GeometryError> {
        if counts.len() != traj.dim() {
            return Err(GeometryError::DimensionMismatch { expected: traj.dim(), got: counts.len() });
        }
        if !(mass_fraction > 0.0 && mass_fraction <= 1.0) {
            return Err(GeometryError::InvalidParameter(format!("mass fraction {mass_fraction} not in (0, 1]")));
        }
        let tail = (1.0 - mass_fraction) / 2.0;
        let mut lo = Vec::with_capacity(traj.dim());
        let mut hi = Vec::with_capacity(traj.dim());
        for k in 0..traj.dim() {
            let mut col = traj.column(k);
            col.sort_by(f64::total_cmp);
            lo.push(quantile(&col, tail));
            hi.push(quantile(&col, 1.0 - tail));
        }
        Self::covering(&lo, &hi, counts)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let n = self.counts.len();
        if n == 0 || self.origin.len() != n || self.spacing.len() != n {
            return Err(GeometryError::InvalidGrid("origin, spacing and counts must share a nonzero length".into()));
        }
        if self.counts.iter().any(|&c| c < 2) {
            return Err(GeometryError::InvalidGrid("every axis needs at least 2 nodes".into()));
        }
        if self.spacing.iter().any(|s| !(s.is_finite() && *s > 0.0)) || self.origin.iter().any(|o| !o.is_finite()) {
            return Err(GeometryError::InvalidGrid("spacing must be finite and positive".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn node_count(&self) -> usize {
        self.counts.iter().product()
    }

    /// Multi-index of flat node `i` (last axis fastest).
    pub fn multi_index(&self, mut i: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            idx[a] = i % self.counts[a];
            i /= self.counts[a];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.counts).fold(0, |acc, (i, c)| acc * c + i)
    }

    pub fn node(&self, i: usize) -> Vec<f64> {
        self.multi_index(i)
            .iter()
            .enumerate()
            .map(|(a, &k)| self.origin[a] + k as f64 * self.spacing[a])
            .collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|a| self.origin[a] + (self.counts[a] - 1) as f64 * self.spacing[a])
            .collect()
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

/// Time derivatives `dx/dt` of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocitySeries {
    times: Vec<f64>,
    dim: usize,
    data: Vec<f64>,
}

impl VelocitySeries {
    pub fn new(times: Vec<f64>, dim: usize, data: Vec<f64>) -> Result<Self, GeometryError> {
        if data.len() != times.len() * dim {
            return Err(GeometryError::DimensionMismatch { expected: times.len() * dim, got: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::InvalidParameter("velocities must be finite".into()));
        }
        Ok(Self { times, dim, data })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn velocity(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn velocities(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }
}

/// Central differences in the interior, one-sided differences at the ends.
pub fn estimate_velocities(traj: &FeatureTrajectory) -> Result<VelocitySeries, GeometryError> {
    let t = traj.times();
    if t.len() < 3 {
        return Err(GeometryError::TooFewSamples { needed: 3, got: t.len() });
    }
    if let Some(i) = t.windows(2).position(|w| w[1] <= w[0]) {
        return Err(GeometryError::NonMonotonicTimes(i + 1));
    }
    let n = t.len();
    let dim = traj.dim();
    let mut data = Vec::with_capacity(n * dim);
    for i in 0..n {
        let (a, b) = match i {
            0 => (0, 1),
            _ if i == n - 1 => (n - 2, n - 1),
            _ => (i - 1, i + 1),
        };
        let dt = t[b] - t[a];
        data.extend(traj.point(b).iter().zip(traj.point(a)).map(|(xb, xa)| (xb - xa) / dt));
    }
    VelocitySeries::new(t.to_vec(), dim, data)
}
