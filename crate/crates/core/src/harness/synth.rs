use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;
use crate::trajectory::FeatureTrajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticKind {
    /// Two incommensurate sinusoids per axis.
    Lissajous,
    /// Ornstein-Uhlenbeck velocity integrated to a position and reflected
    /// at the box walls.
    NoiseWalk,
}

/// Recipe for a deterministic synthetic trajectory inside `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
}

/// Velocity correlation time of the noise walk.
const WALK_TAU_S: f64 = 0.25;
/// Stationary speed of the noise walk per axis, in box widths per second.
const WALK_SPEED: f64 = 0.5;

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if !(self.duration_s > 0.0 && self.sample_rate_hz > 0.0) {
            return Err(HarnessError::InvalidSpec("duration and sample rate must be positive".into()));
        }
        if self.lo.is_empty() || self.lo.len() != self.hi.len() {
            return Err(HarnessError::InvalidSpec("lo and hi must share a nonzero length".into()));
        }
        if self.lo.iter().zip(&self.hi).any(|(l, h)| !(l.is_finite() && h.is_finite() && l < h)) {
            return Err(HarnessError::InvalidSpec("box must satisfy lo < hi on every axis".into()));
        }
        if self.len() < 3 {
            return Err(HarnessError::InvalidSpec("spec yields fewer than 3 samples".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Number of samples, `round(duration * rate)`.
    pub fn len(&self) -> usize {
        (self.duration_s * self.sample_rate_hz).round() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<FeatureTrajectory, HarnessError> {
    spec.validate()?;
    let (n, len) = (spec.dim(), spec.len());
    let dt = 1.0 / spec.sample_rate_hz;
    let times: Vec<f64> = (0..len).map(|i| i as f64 * dt).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut data = vec![0.0; len * n];
    match spec.kind {
        SyntheticKind::Lissajous => {
            let phase = Uniform::new(0.0, std::f64::consts::TAU).expect("valid range");
            for k in 0..n {
                let (center, half) = (0.5 * (spec.lo[k] + spec.hi[k]), 0.5 * (spec.hi[k] - spec.lo[k]));
                // Square roots of distinct primes are rationally independent.
                let primes: [f64; 8] = [2.0, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0, 19.0];
                let f1 = 0.11 * primes[(2 * k) % 8].sqrt();
                let f2 = 0.07 * primes[(2 * k + 1) % 8].sqrt();
                let (p1, p2): (f64, f64) = (phase.sample(&mut rng), phase.sample(&mut rng));
                for (i, t) in times.iter().enumerate() {
                    let w = 0.55 * (std::f64::consts::TAU * f1 * t + p1).sin()
                        + 0.44 * (std::f64::consts::TAU * f2 * t + p2).sin();
                    data[i * n + k] = center + half * w;
                }
            }
        }
        SyntheticKind::NoiseWalk => {
            let decay = (-dt / WALK_TAU_S).exp();
            let kick = (1.0 - decay * decay).sqrt();
            let width: Vec<f64> = spec.lo.iter().zip(&spec.hi).map(|(l, h)| h - l).collect();
            let mut x: Vec<f64> = (0..n).map(|k| 0.5 * (spec.lo[k] + spec.hi[k])).collect();
            let mut v: Vec<f64> = vec![0.0; n];
            for i in 0..len {
                for k in 0..n {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    v[k] = decay * v[k] + kick * WALK_SPEED * width[k] * e;
                    x[k] += v[k] * dt;
                    // Reflect until inside; one pass suffices unless a step
                    // exceeds the box width.
                    while x[k] < spec.lo[k] || x[k] > spec.hi[k] {
                        if x[k] < spec.lo[k] {
                            x[k] = 2.0 * spec.lo[k] - x[k];
                        } else {
                            x[k] = 2.0 * spec.hi[k] - x[k];
                        }
                        v[k] = -v[k];
                    }
                    data[i * n + k] = x[k];
                }
            }
        }
    }
    Ok(FeatureTrajectory::from_flat(times, n, data)?)
}
