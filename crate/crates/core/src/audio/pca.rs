use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::AudioError;
use crate::trajectory::FeatureTrajectory;

/// Principal axes of a trajectory. `components` rows are orthonormal and
/// ordered by non-increasing `explained_variance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.components.len()
    }

    pub fn project_point(&self, p: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| c.iter().zip(p).zip(&self.mean).map(|((c, x), m)| c * (x - m)).sum())
            .collect()
    }
}

/// Fits the top-`k` principal components. The covariance is normalized by
/// `T`; each component is signed so its largest-magnitude entry is positive.
pub fn fit_pca(traj: &FeatureTrajectory, k: usize) -> Result<PcaModel, AudioError> {
    let n = traj.dim();
    let t = traj.len();
    if k == 0 || k > n {
        return Err(AudioError::ConfigMismatch(format!("cannot keep {k} components of {n}-D data")));
    }
    if t <= k {
        return Err(AudioError::InvalidTrajectory(format!("{t} samples is too few for {k} components")));
    }
    let mut mean = vec![0.0; n];
    for p in traj.points() {
        for (m, x) in mean.iter_mut().zip(p) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= t as f64;
    }
    let mut cov = DMatrix::<f64>::zeros(n, n);
    let mut centered = vec![0.0; n];
    for p in traj.points() {
        for (c, (x, m)) in centered.iter_mut().zip(p.iter().zip(&mean)) {
            *c = x - m;
        }
        for i in 0..n {
            for j in i..n {
                cov[(i, j)] += centered[i] * centered[j];
            }
        }
    }
    for i in 0..n {
        for j in i..n {
            let v = cov[(i, j)] / t as f64;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let top = eig.eigenvalues[order[0]].max(0.0);
    let tol = top * 1e-12 * n as f64;
    let found = order.iter().filter(|&&i| eig.eigenvalues[i] > tol && eig.eigenvalues[i] > 0.0).count();
    if found < k {
        return Err(AudioError::RankDeficient { wanted: k, found });
    }

    let mut components = Vec::with_capacity(k);
    let mut explained_variance = Vec::with_capacity(k);
    for &i in &order[..k] {
        let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        let mut lead = 0;
        for (j, x) in v.iter().enumerate() {
            if x.abs() > v[lead].abs() {
                lead = j;
            }
        }
        if v[lead] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        components.push(v);
        explained_variance.push(eig.eigenvalues[i]);
    }
    Ok(PcaModel { mean, components, explained_variance })
}

/// Projects every point onto the model's components.
pub fn project(traj: &FeatureTrajectory, model: &PcaModel) -> Result<FeatureTrajectory, AudioError> {
    if traj.dim() != model.input_dim() {
        return Err(AudioError::DimensionMismatch { expected: model.input_dim(), got: traj.dim() });
    }
    traj.map_points(model.output_dim(), |p| model.project_point(p))
        .map_err(|e| AudioError::InvalidTrajectory(e.to_string()))
}
