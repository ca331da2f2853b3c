//! Time-ordered feature trajectories `x(t)`.

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

/// A time-ordered sequence of `dim`-dimensional points, stored row-major.
///
/// Times are strictly increasing and every value is finite. Trajectories
/// produced by feature extraction hold at least three samples; derived
/// trajectories (segments, rescaled subsets) may be shorter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTrajectory {
    times: Vec<f64>,
    dim: usize,
    data: Vec<f64>,
}

impl FeatureTrajectory {
    pub fn new(times: Vec<f64>, points: Vec<Vec<f64>>) -> Result<Self, GeometryError> {
        let dim = points.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(points.len() * dim);
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(GeometryError::InvalidParameter(format!(
                    "row {i} has {} values, expected {dim}",
                    p.len()
                )));
            }
            data.extend_from_slice(p);
        }
        Self::from_flat(times, dim, data)
    }

    pub fn from_flat(times: Vec<f64>, dim: usize, data: Vec<f64>) -> Result<Self, GeometryError> {
        if times.is_empty() {
            return Err(GeometryError::TooFewSamples { needed: 1, got: 0 });
        }
        if dim == 0 {
            return Err(GeometryError::InvalidParameter("points must have at least one dimension".into()));
        }
        if data.len() != times.len() * dim {
            return Err(GeometryError::DimensionMismatch { expected: times.len() * dim, got: data.len() });
        }
        if let Some(i) = times.iter().chain(data.iter()).position(|v| !v.is_finite()) {
            return Err(GeometryError::InvalidParameter(format!("non-finite value at flat index {i}")));
        }
        if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(GeometryError::NonMonotonicTimes(i + 1));
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

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn flat(&self) -> &[f64] {
        &self.data
    }

    /// Values of one coordinate over time.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.points().map(|p| p[k]).collect()
    }

    /// Index of the sample whose time is closest to `t` (earlier index on ties).
    pub fn nearest_index(&self, t: f64) -> usize {
        let i = self.times.partition_point(|&x| x < t);
        if i == 0 {
            return 0;
        }
        if i == self.times.len() {
            return i - 1;
        }
        if (t - self.times[i - 1]) <= (self.times[i] - t) {
            i - 1
        } else {
            i
        }
    }

    /// Samples with `start <= t <= end`.
    pub fn segment(&self, start: f64, end: f64) -> Result<Self, GeometryError> {
        let lo = self.times.partition_point(|&x| x < start);
        let hi = self.times.partition_point(|&x| x <= end);
        if hi <= lo {
            return Err(GeometryError::TooFewSamples { needed: 1, got: 0 });
        }
        Ok(Self {
            times: self.times[lo..hi].to_vec(),
            dim: self.dim,
            data: self.data[lo * self.dim..hi * self.dim].to_vec(),
        })
    }

    /// Same points with every time shifted by `offset`.
    pub fn shifted(&self, offset: f64) -> Self {
        Self {
            times: self.times.iter().map(|t| t + offset).collect(),
            dim: self.dim,
            data: self.data.clone(),
        }
    }

    /// Applies `f` pointwise, keeping times.
    pub fn map_points<F>(&self, out_dim: usize, mut f: F) -> Result<Self, GeometryError>
    where
        F: FnMut(&[f64]) -> Vec<f64>,
    {
        let mut data = Vec::with_capacity(self.len() * out_dim);
        for p in self.points() {
            let q = f(p);
            if q.len() != out_dim {
                return Err(GeometryError::DimensionMismatch { expected: out_dim, got: q.len() });
            }
            data.extend(q);
        }
        Self::from_flat(self.times.clone(), out_dim, data)
    }

    /// Per-axis `(min, max)`.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        (0..self.dim)
            .map(|k| {
                self.points().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                    (lo.min(p[k]), hi.max(p[k]))
                })
            })
            .collect()
    }
}
