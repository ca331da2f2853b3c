use serde::{Deserialize, Serialize};

use crate::error::HarnessError;
use crate::trajectory::FeatureTrajectory;

/// Timestamps closer than this are treated as the same sample.
const TIME_MATCH_S: f64 = 1e-9;

/// Per-dimension agreement of two trajectories over their shared timestamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonReport {
    pub compared: usize,
    /// `compared` over the length of the longer input.
    pub fraction_compared: f64,
    /// Samples of `a` (resp. `b`) with no partner in the other trajectory.
    pub excluded_a: usize,
    pub excluded_b: usize,
    pub rms: Vec<f64>,
    /// `rms` divided by the range of `a` on each dimension over the compared
    /// samples (left unscaled when that range is zero).
    pub rms_normalized: Vec<f64>,
    pub correlation: Vec<f64>,
}

/// Matches samples by timestamp and reports RMS difference and Pearson
/// correlation per dimension. A constant dimension correlates 1 with an
/// identical series and 0 otherwise.
pub fn compare_representations(a: &FeatureTrajectory, b: &FeatureTrajectory) -> Result<ComparisonReport, HarnessError> {
    let n = a.dim();
    if b.dim() != n {
        return Err(HarnessError::DimensionMismatch { expected: n, got: b.dim() });
    }
    let (ta, tb) = (a.times(), b.times());
    let mut pairs = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < ta.len() && j < tb.len() {
        if (ta[i] - tb[j]).abs() <= TIME_MATCH_S {
            pairs.push((i, j));
            i += 1;
            j += 1;
        } else if ta[i] < tb[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    if pairs.is_empty() {
        return Err(HarnessError::NoOverlap);
    }
    let m = pairs.len() as f64;
    let mut report = ComparisonReport {
        compared: pairs.len(),
        fraction_compared: m / ta.len().max(tb.len()) as f64,
        excluded_a: ta.len() - pairs.len(),
        excluded_b: tb.len() - pairs.len(),
        rms: Vec::with_capacity(n),
        rms_normalized: Vec::with_capacity(n),
        correlation: Vec::with_capacity(n),
    };
    for k in 0..n {
        let xa: Vec<f64> = pairs.iter().map(|&(i, _)| a.point(i)[k]).collect();
        let xb: Vec<f64> = pairs.iter().map(|&(_, j)| b.point(j)[k]).collect();
        let rms = (xa.iter().zip(&xb).map(|(p, q)| (p - q) * (p - q)).sum::<f64>() / m).sqrt();
        let (lo, hi) = xa.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
        let range = hi - lo;
        report.rms.push(rms);
        report.rms_normalized.push(if range > 0.0 { rms / range } else { rms });
        report.correlation.push(pearson(&xa, &xb));
    }
    Ok(report)
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let m = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / m, b.iter().sum::<f64>() / m);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return if a == b { 1.0 } else { 0.0 };
    }
    (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn wave(n: usize, mut f: impl FnMut(f64) -> Vec<f64>) -> FeatureTrajectory {
        let times: Vec<f64> = (0..n).map(|i| i as f64 * 0.01).collect();
        let pts = times.iter().map(|&t| f(t)).collect();
        FeatureTrajectory::new(times, pts).unwrap()
    }

    #[test]
    fn identical_trajectories() {
        let a = wave(200, |t| vec![t.sin(), (2.0 * t).cos()]);
        let r = compare_representations(&a, &a).unwrap();
        assert_eq!(r.rms, vec![0.0, 0.0]);
        assert!(r.correlation.iter().all(|c| (c - 1.0).abs() < 1e-12));
        assert_eq!((r.compared, r.excluded_a, r.excluded_b, r.fraction_compared), (200, 0, 0, 1.0));
    }

    #[test]
    fn constant_offset() {
        let a = wave(200, |t| vec![t.sin(), (2.0 * t).cos()]);
        let b = a.map_points(2, |p| vec![p[0] + 0.7, p[1] - 0.25]).unwrap();
        let r = compare_representations(&a, &b).unwrap();
        assert!((r.rms[0] - 0.7).abs() < 1e-12 && (r.rms[1] - 0.25).abs() < 1e-12);
        assert!(r.correlation.iter().all(|c| (c - 1.0).abs() < 1e-12));
    }

    #[test]
    fn sign_flip_gives_minus_one() {
        let a = wave(200, |t| vec![t.sin(), (2.0 * t).cos()]);
        let b = a.map_points(2, |p| vec![p[0], -p[1]]).unwrap();
        let r = compare_representations(&a, &b).unwrap();
        assert!((r.correlation[0] - 1.0).abs() < 1e-12);
        assert!((r.correlation[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn intersection_and_no_overlap() {
        let a = wave(100, |t| vec![t]);
        let b = a.segment(0.5, 2.0).unwrap();
        let r = compare_representations(&a, &b).unwrap();
        assert_eq!(r.compared, b.len());
        assert_eq!(r.excluded_a, 100 - b.len());
        assert!(matches!(compare_representations(&a, &a.shifted(100.0)), Err(HarnessError::NoOverlap)));
    }

    proptest! {
        #[test]
        fn report_bounds(seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let a = wave(50, |_| vec![rng.random::<f64>()]);
            let b = a.map_points(1, |p| vec![p[0] * 0.3 + (p[0] * 17.0).sin()]).unwrap();
            let r = compare_representations(&a, &b).unwrap();
            prop_assert!(r.correlation[0] >= -1.0 && r.correlation[0] <= 1.0);
            prop_assert!(r.fraction_compared >= 0.0 && r.fraction_compared <= 1.0);
        }
    }
}
