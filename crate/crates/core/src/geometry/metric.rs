use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::GeometryError;
use crate::exec::Execution;
use crate::trajectory::FeatureTrajectory;

use super::spline::TensorSpline;
use super::{GridSpec, VelocitySeries};

pub const METRIC_FORMAT_VERSION: &str = "geoscale-metric-v1";

/// Neighborhood and validity settings for [`estimate_metric_grid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricEstimation {
    /// Per-axis half-width of the box neighborhood; defaults to the grid spacing.
    pub radius: Option<Vec<f64>>,
    /// Defaults to `4 N`.
    pub min_samples: Option<usize>,
    pub cond_max: f64,
    pub ridge: f64,
}

impl Default for MetricEstimation {
    fn default() -> Self {
        Self { radius: None, min_samples: None, cond_max: 1e6, ridge: 1e-6 }
    }
}

/// Sampled covariant metric `g_kl` on a grid, with a smooth interpolant over
/// the largest box of valid nodes.
#[derive(Debug)]
pub struct MetricField {
    grid: GridSpec,
    samples: Vec<f64>,
    valid: Vec<bool>,
    sample_counts: Vec<usize>,
    domain_nodes: (Vec<usize>, Vec<usize>),
    lower: Vec<f64>,
    upper: Vec<f64>,
    spline: TensorSpline,
    clamp_count: AtomicU64,
}

impl Clone for MetricField {
    fn clone(&self) -> Self {
        Self {
            grid: self.grid.clone(),
            samples: self.samples.clone(),
            valid: self.valid.clone(),
            sample_counts: self.sample_counts.clone(),
            domain_nodes: self.domain_nodes.clone(),
            lower: self.lower.clone(),
            upper: self.upper.clone(),
            spline: self.spline.clone(),
            clamp_count: AtomicU64::new(self.clamp_count.load(Ordering::Relaxed)),
        }
    }
}

impl PartialEq for MetricField {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid
            && self.samples == other.samples
            && self.valid == other.valid
            && self.sample_counts == other.sample_counts
    }
}

fn upper_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|a| (a..n).map(move |b| (a, b))).collect()
}

/// Smallest eigenvalue of a symmetric matrix stored row-major.
fn min_eigenvalue(g: &[f64], n: usize) -> f64 {
    if n == 1 {
        return g[0];
    }
    if n == 2 {
        let (a, b, c) = (g[0], g[1], g[3]);
        return 0.5 * (a + c) - (0.25 * (a - c) * (a - c) + b * b).sqrt();
    }
    let m = DMatrix::from_row_slice(n, n, g);
    m.symmetric_eigenvalues().min()
}

/// `λ_max / λ_min` of a symmetric PSD matrix (infinite when singular).
fn condition_number(m: &[f64], n: usize) -> f64 {
    let eig = DMatrix::from_row_slice(n, n, m).symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    if lo <= 0.0 || hi <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

impl MetricField {
    /// Builds a field from per-node covariant samples (`None` marks an
    /// invalid node). Valid samples must be symmetric and positive definite.
    pub fn from_samples(grid: GridSpec, samples: Vec<Option<Vec<f64>>>) -> Result<Self, GeometryError> {
        let counts = vec![0; samples.len()];
        Self::from_samples_with_counts(grid, samples, counts)
    }

    /// Samples an analytic metric `g(x)` (row-major `N × N`) at every node.
    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self, GeometryError> {
        grid.validate()?;
        let samples = (0..grid.node_count()).map(|i| Some(f(&grid.node(i)))).collect();
        Self::from_samples(grid, samples)
    }

    fn from_samples_with_counts(
        grid: GridSpec,
        samples: Vec<Option<Vec<f64>>>,
        sample_counts: Vec<usize>,
    ) -> Result<Self, GeometryError> {
        grid.validate()?;
        let n = grid.dim();
        if samples.len() != grid.node_count() {
            return Err(GeometryError::InvalidGrid(format!(
                "{} samples for {} nodes",
                samples.len(),
                grid.node_count()
            )));
        }
        let mut flat = vec![0.0; samples.len() * n * n];
        let mut valid = vec![false; samples.len()];
        for (i, s) in samples.iter().enumerate() {
            let Some(g) = s else { continue };
            if g.len() != n * n || g.iter().any(|v| !v.is_finite()) {
                return Err(GeometryError::InvalidParameter(format!("node {i}: expected {} finite entries", n * n)));
            }
            let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
            for a in 0..n {
                for b in 0..a {
                    if (g[a * n + b] - g[b * n + a]).abs() > 1e-12 * scale {
                        return Err(GeometryError::InvalidParameter(format!("node {i}: metric is not symmetric")));
                    }
                }
            }
            if min_eigenvalue(g, n) <= 0.0 {
                return Err(GeometryError::InvalidParameter(format!("node {i}: metric is not positive definite")));
            }
            flat[i * n * n..(i + 1) * n * n].copy_from_slice(g);
            valid[i] = true;
        }
        let (lo, hi) = largest_valid_box(&grid, &valid).ok_or(GeometryError::NoValidNodes)?;

        let pairs = upper_pairs(n);
        let sub_counts: Vec<usize> = lo.iter().zip(&hi).map(|(l, h)| h - l + 1).collect();
        let sub_grid = GridSpec {
            origin: (0..n).map(|a| grid.origin[a] + lo[a] as f64 * grid.spacing[a]).collect(),
            spacing: grid.spacing.clone(),
            counts: sub_counts,
        };
        let mut values = Vec::with_capacity(sub_grid.node_count() * pairs.len());
        for j in 0..sub_grid.node_count() {
            let idx: Vec<usize> = sub_grid.multi_index(j).iter().zip(&lo).map(|(k, l)| k + l).collect();
            let node = grid.flat_index(&idx);
            let g = &flat[node * n * n..(node + 1) * n * n];
            values.extend(pairs.iter().map(|&(a, b)| g[a * n + b]));
        }
        let spline = TensorSpline::new(
            sub_grid.origin.clone(),
            sub_grid.spacing.clone(),
            sub_grid.counts.clone(),
            pairs.len(),
            &values,
        );
        let lower = sub_grid.origin.clone();
        let upper = sub_grid.upper();
        Ok(Self {
            grid,
            samples: flat,
            valid,
            sample_counts,
            domain_nodes: (lo, hi),
            lower,
            upper,
            spline,
            clamp_count: AtomicU64::new(0),
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn is_valid(&self, node: usize) -> bool {
        self.valid[node]
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    pub fn sample_counts(&self) -> &[usize] {
        &self.sample_counts
    }

    /// Stored covariant sample at a node, if valid.
    pub fn sample(&self, node: usize) -> Option<&[f64]> {
        let nn = self.dim() * self.dim();
        self.valid[node].then(|| &self.samples[node * nn..(node + 1) * nn])
    }

    /// Corner-to-corner coordinate box of the interpolation domain.
    pub fn domain(&self) -> (&[f64], &[f64]) {
        (&self.lower, &self.upper)
    }

    /// Node-index range `[lo, hi]` of the domain.
    pub fn domain_nodes(&self) -> (&[usize], &[usize]) {
        (&self.domain_nodes.0, &self.domain_nodes.1)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().enumerate().all(|(a, &v)| {
                let tol = 1e-12 * self.grid.spacing[a];
                v >= self.lower[a] - tol && v <= self.upper[a] + tol
            })
    }

    /// Number of queries whose interpolated metric needed eigenvalue clamping.
    pub fn clamp_count(&self) -> u64 {
        self.clamp_count.load(Ordering::Relaxed)
    }

    /// Geodesic step (in affine parameter) moving about 5% of the finest grid
    /// spacing in coordinates for a tangent vector `v`.
    pub fn default_step(&self, v: &[f64]) -> f64 {
        let speed = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if speed == 0.0 {
            return f64::INFINITY;
        }
        0.05 * self.grid.min_spacing() / speed
    }

    /// Interpolated metric at `x` (row-major), plus `∂_c g_ab` at
    /// `dg[(a N + b) N + c]` when requested.
    pub(crate) fn eval(&self, x: &[f64], g: &mut [f64], dg: Option<&mut [f64]>) -> Result<(), GeometryError> {
        let n = self.dim();
        if x.len() != n {
            return Err(GeometryError::DimensionMismatch { expected: n, got: x.len() });
        }
        if !self.contains(x) {
            return Err(GeometryError::OutOfDomain { point: x.to_vec() });
        }
        let ncomp = self.spline.ncomp();
        let mut comp = [0.0f64; 36];
        let mut grad = [0.0f64; 36 * 8];
        let want_grad = dg.is_some();
        self.spline.eval(x, &mut comp[..ncomp], want_grad.then(|| &mut grad[..ncomp * n]));
        let mut c = 0;
        for a in 0..n {
            for b in a..n {
                g[a * n + b] = comp[c];
                g[b * n + a] = comp[c];
                c += 1;
            }
        }
        if let Some(dg) = dg {
            let mut c = 0;
            for a in 0..n {
                for b in a..n {
                    for d in 0..n {
                        let v = grad[c * n + d];
                        dg[(a * n + b) * n + d] = v;
                        dg[(b * n + a) * n + d] = v;
                    }
                    c += 1;
                }
            }
        }
        let trace: f64 = (0..n).map(|a| g[a * n + a]).sum();
        let floor = 1e-9 * trace.abs().max(f64::MIN_POSITIVE);
        if min_eigenvalue(g, n) < floor {
            self.clamp_count.fetch_add(1, Ordering::Relaxed);
            let eig = SymmetricEigen::new(DMatrix::from_row_slice(n, n, g));
            let lambda = eig.eigenvalues.map(|l| l.max(floor));
            let fixed = &eig.eigenvectors * DMatrix::from_diagonal(&lambda) * eig.eigenvectors.transpose();
            for a in 0..n {
                for b in 0..n {
                    g[a * n + b] = 0.5 * (fixed[(a, b)] + fixed[(b, a)]);
                }
            }
        }
        Ok(())
    }
}

/// Interpolated `g_kl(x)`, symmetric positive definite.
pub fn metric_at(field: &MetricField, x: &[f64]) -> Result<DMatrix<f64>, GeometryError> {
    let n = field.dim();
    let mut g = vec![0.0; n * n];
    field.eval(x, &mut g, None)?;
    Ok(DMatrix::from_row_slice(n, n, &g))
}

/// Largest all-valid sub-box (most nodes; ties go to the lexicographically
/// smallest lower corner) with at least two nodes per axis.
fn largest_valid_box(grid: &GridSpec, valid: &[bool]) -> Option<(Vec<usize>, Vec<usize>)> {
    let n = grid.dim();
    // Prefix counts of invalid nodes over a grid padded by one on each axis.
    let padded: Vec<usize> = grid.counts.iter().map(|c| c + 1).collect();
    let padded_grid = GridSpec { origin: vec![0.0; n], spacing: vec![1.0; n], counts: padded.clone() };
    let mut prefix = vec![0i64; padded_grid.node_count()];
    for p in 0..prefix.len() {
        let idx = padded_grid.multi_index(p);
        if idx.contains(&0) {
            continue;
        }
        let orig: Vec<usize> = idx.iter().map(|i| i - 1).collect();
        let mut total = i64::from(!valid[grid.flat_index(&orig)]);
        // Inclusion-exclusion over the 2^n - 1 lower neighbors.
        for mask in 1..(1usize << n) {
            let nb: Vec<usize> = idx.iter().enumerate().map(|(a, &i)| if mask >> a & 1 == 1 { i - 1 } else { i }).collect();
            let sign = if mask.count_ones() % 2 == 1 { 1 } else { -1 };
            total += sign * prefix[padded_grid.flat_index(&nb)];
        }
        prefix[p] = total;
    }
    let invalid_in = |lo: &[usize], hi: &[usize]| -> i64 {
        let mut total = 0;
        for mask in 0..(1usize << n) {
            let corner: Vec<usize> = (0..n).map(|a| if mask >> a & 1 == 1 { lo[a] } else { hi[a] + 1 }).collect();
            let sign = if mask.count_ones() % 2 == 0 { 1 } else { -1 };
            total += sign * prefix[padded_grid.flat_index(&corner)];
        }
        total
    };

    let ranges: Vec<Vec<(usize, usize)>> = grid
        .counts
        .iter()
        .map(|&c| (0..c).flat_map(|l| (l + 1..c).map(move |h| (l, h))).collect())
        .collect();
    let mut best: Option<(usize, Vec<usize>, Vec<usize>)> = None;
    let mut choice = vec![0usize; n];
    loop {
        let lo: Vec<usize> = (0..n).map(|a| ranges[a][choice[a]].0).collect();
        let hi: Vec<usize> = (0..n).map(|a| ranges[a][choice[a]].1).collect();
        let size: usize = lo.iter().zip(&hi).map(|(l, h)| h - l + 1).product();
        let better = match &best {
            None => true,
            Some((s, blo, _)) => size > *s || (size == *s && lo < *blo),
        };
        if better && invalid_in(&lo, &hi) == 0 {
            best = Some((size, lo, hi));
        }
        let mut a = n;
        loop {
            if a == 0 {
                return best.map(|(_, lo, hi)| (lo, hi));
            }
            a -= 1;
            choice[a] += 1;
            if choice[a] < ranges[a].len() {
                break;
            }
            choice[a] = 0;
        }
    }
}

/// Estimates the covariant metric at every grid node from the velocity
/// outer products of trajectory samples in a box neighborhood of the node.
///
/// A node is invalid when it has fewer than `min_samples` neighbors or the
/// averaged outer product is ill-conditioned beyond `cond_max`. Otherwise
/// `g^kl = <v v^T> + ridge (tr/N) I` and `g_kl` is its inverse.
pub fn estimate_metric_grid(
    traj: &FeatureTrajectory,
    vel: &VelocitySeries,
    grid: &GridSpec,
    est: &MetricEstimation,
) -> Result<MetricField, GeometryError> {
    estimate_metric_grid_with(traj, vel, grid, est, Execution::default())
}

pub fn estimate_metric_grid_with(
    traj: &FeatureTrajectory,
    vel: &VelocitySeries,
    grid: &GridSpec,
    est: &MetricEstimation,
    exec: Execution,
) -> Result<MetricField, GeometryError> {
    grid.validate()?;
    let n = grid.dim();
    if traj.dim() != n || vel.dim() != n {
        return Err(GeometryError::DimensionMismatch { expected: n, got: traj.dim().min(vel.dim()) });
    }
    if traj.len() != vel.len() {
        return Err(GeometryError::DimensionMismatch { expected: traj.len(), got: vel.len() });
    }
    let radius = est.radius.clone().unwrap_or_else(|| grid.spacing.clone());
    if radius.len() != n || radius.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(GeometryError::InvalidParameter("radius must hold N positive values".into()));
    }
    let min_samples = est.min_samples.unwrap_or(4 * n);
    if min_samples < n {
        return Err(GeometryError::InvalidParameter(format!("min_samples {min_samples} is below N = {n}")));
    }
    if !(est.cond_max > 1.0 && est.ridge >= 0.0) {
        return Err(GeometryError::InvalidParameter("cond_max must exceed 1 and ridge be non-negative".into()));
    }

    let results = exec.map_indexed(grid.node_count(), |node| {
        let y = grid.node(node);
        let mut acc = vec![0.0; n * n];
        let mut count = 0usize;
        for (x, v) in traj.points().zip(vel.velocities()) {
            if x.iter().zip(&y).zip(&radius).all(|((xi, yi), r)| (xi - yi).abs() <= *r) {
                count += 1;
                for a in 0..n {
                    for b in a..n {
                        acc[a * n + b] += v[a] * v[b];
                    }
                }
            }
        }
        if count < min_samples {
            return (None, count);
        }
        for a in 0..n {
            for b in a..n {
                acc[a * n + b] /= count as f64;
                acc[b * n + a] = acc[a * n + b];
            }
        }
        if condition_number(&acc, n) > est.cond_max {
            return (None, count);
        }
        let trace: f64 = (0..n).map(|a| acc[a * n + a]).sum();
        for a in 0..n {
            acc[a * n + a] += est.ridge * trace / n as f64;
        }
        let inverse = DMatrix::from_row_slice(n, n, &acc).cholesky().map(|c| c.inverse());
        match inverse {
            Some(inv) => {
                let mut g = vec![0.0; n * n];
                for a in 0..n {
                    for b in 0..n {
                        g[a * n + b] = 0.5 * (inv[(a, b)] + inv[(b, a)]);
                    }
                }
                (Some(g), count)
            }
            None => (None, count),
        }
    });
    let (samples, counts): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    MetricField::from_samples_with_counts(grid.clone(), samples, counts)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetricFieldRepr {
    version: String,
    grid: GridSpec,
    dim: usize,
    /// Node-major, each node's `N × N` matrix row-major; zeros where invalid.
    g: Vec<f64>,
    valid: Vec<bool>,
    #[serde(default)]
    sample_counts: Vec<usize>,
}

impl Serialize for MetricField {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        MetricFieldRepr {
            version: METRIC_FORMAT_VERSION.to_string(),
            grid: self.grid.clone(),
            dim: self.dim(),
            g: self.samples.clone(),
            valid: self.valid.clone(),
            sample_counts: self.sample_counts.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for MetricField {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let repr = MetricFieldRepr::deserialize(d)?;
        if repr.version != METRIC_FORMAT_VERSION {
            return Err(D::Error::custom(format!("unsupported metric format {:?}", repr.version)));
        }
        let nn = repr.dim * repr.dim;
        if repr.dim != repr.grid.dim() || repr.g.len() != repr.valid.len() * nn {
            return Err(D::Error::custom("metric samples do not match the grid"));
        }
        let samples = repr
            .valid
            .iter()
            .enumerate()
            .map(|(i, &ok)| ok.then(|| repr.g[i * nn..(i + 1) * nn].to_vec()))
            .collect();
        let counts = if repr.sample_counts.is_empty() { vec![0; repr.valid.len()] } else { repr.sample_counts };
        if counts.len() != repr.valid.len() {
            return Err(D::Error::custom("sample_counts length does not match the grid"));
        }
        MetricField::from_samples_with_counts(repr.grid, samples, counts).map_err(D::Error::custom)
    }
}
