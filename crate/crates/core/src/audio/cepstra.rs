use std::f64::consts::PI;

use crate::error::AudioError;
use crate::exec::Execution;
use crate::trajectory::FeatureTrajectory;

use super::{CepstraConfig, Spectrogram};

/// Half-width, in bins, of the moving average spanning `width_hz`.
pub fn smoothing_half_width(width_hz: f64, bin_width_hz: f64) -> usize {
    (width_hz / (2.0 * bin_width_hz)).round() as usize
}

/// Orthonormal DCT-II basis, `rows × n`: row `k` holds
/// `sqrt(2/n) c_k cos(pi k (2j + 1) / 2n)` with `c_0 = 1/sqrt(2)`.
fn dct_basis(rows: usize, n: usize) -> Vec<f64> {
    let mut basis = Vec::with_capacity(rows * n);
    for k in 0..rows {
        let scale = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
        for j in 0..n {
            basis.push(scale * (PI * k as f64 * (2 * j + 1) as f64 / (2 * n) as f64).cos());
        }
    }
    basis
}

/// Full orthonormal DCT-II of `x`.
pub fn dct_ii_orthonormal(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let basis = dct_basis(n, n);
    basis.chunks_exact(n).map(|row| dot(row, x)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Edge-truncated centered moving average.
fn smooth(frame: &[f64], half: usize, out: &mut Vec<f64>) {
    out.clear();
    let n = frame.len();
    for b in 0..n {
        let lo = b.saturating_sub(half);
        let hi = (b + half).min(n - 1);
        let sum: f64 = frame[lo..=hi].iter().sum();
        out.push(sum / (hi - lo + 1) as f64);
    }
}

/// Cepstral trajectory: per frame, moving-average smoothing over
/// `smoothing_width_hz`, floored log, orthonormal DCT-II, first `n_cepstra`
/// coefficients. Times are frame centers.
pub fn cepstra(spec: &Spectrogram, cfg: &CepstraConfig) -> Result<FeatureTrajectory, AudioError> {
    cepstra_with(spec, cfg, Execution::default())
}

pub fn cepstra_with(
    spec: &Spectrogram,
    cfg: &CepstraConfig,
    exec: Execution,
) -> Result<FeatureTrajectory, AudioError> {
    cfg.validate()?;
    let n = spec.n_bins();
    if cfg.n_cepstra > n {
        return Err(AudioError::ConfigMismatch(format!(
            "n_cepstra = {} exceeds the {n} available coefficients",
            cfg.n_cepstra
        )));
    }
    let half = smoothing_half_width(cfg.smoothing_width_hz, spec.bin_width_hz);
    let basis = dct_basis(cfg.n_cepstra, n);
    let rows = exec.map_indexed(spec.n_frames(), |i| {
        let mut smoothed = Vec::with_capacity(n);
        smooth(spec.frame(i), half, &mut smoothed);
        for m in &mut smoothed {
            *m = m.max(cfg.log_floor).ln();
        }
        basis.chunks_exact(n).map(|row| dot(row, &smoothed)).collect::<Vec<f64>>()
    });
    let times = (0..spec.n_frames()).map(|i| spec.frame_center(i)).collect();
    FeatureTrajectory::from_flat(times, cfg.n_cepstra, rows.concat())
        .map_err(|e| AudioError::InvalidTrajectory(e.to_string()))
}
