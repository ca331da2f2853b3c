//! Speech front end: WAV input, short-time spectra, the band-edge channel
//! filter, smoothed log-DCT cepstra and PCA reduction.

mod cepstra;
mod filter;
mod pca;
mod stft;
mod wav;

use serde::{Deserialize, Serialize};

use crate::error::AudioError;

pub use cepstra::{cepstra, cepstra_with, dct_ii_orthonormal, smoothing_half_width};
pub use filter::{apply_channel_filter, ChannelFilterSpec, MIN_GAIN};
pub use pca::{fit_pca, project, PcaModel};
pub use stft::{hamming, stft, stft_with};
pub use wav::{load_wav, write_wav};

/// Mono audio with samples in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate_hz: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self, AudioError> {
        if samples.is_empty() {
            return Err(AudioError::EmptyFile);
        }
        if sample_rate_hz == 0 {
            return Err(AudioError::InvalidClip("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite() || s.abs() > 1.0) {
            return Err(AudioError::InvalidClip(format!(
                "sample {i} = {} is not a finite value in [-1, 1]",
                samples[i]
            )));
        }
        Ok(Self { samples, sample_rate_hz })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate_hz)
    }
}

/// Framing and cepstral parameters for the feature pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CepstraConfig {
    pub window_ms: f64,
    pub hop_ms: f64,
    pub smoothing_width_hz: f64,
    pub n_cepstra: usize,
    pub log_floor: f64,
}

impl Default for CepstraConfig {
    fn default() -> Self {
        Self {
            window_ms: 16.0,
            hop_ms: 4.0,
            smoothing_width_hz: 800.0,
            n_cepstra: 53,
            log_floor: 1e-10,
        }
    }
}

impl CepstraConfig {
    pub fn validate(&self) -> Result<(), AudioError> {
        let positive = [
            ("window_ms", self.window_ms),
            ("hop_ms", self.hop_ms),
            ("smoothing_width_hz", self.smoothing_width_hz),
            ("log_floor", self.log_floor),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(AudioError::ConfigMismatch(format!("{name} must be positive, got {v}")));
            }
        }
        if self.n_cepstra == 0 {
            return Err(AudioError::ConfigMismatch("n_cepstra must be positive".into()));
        }
        Ok(())
    }

    pub fn window_samples(&self, sample_rate_hz: u32) -> usize {
        ((self.window_ms * f64::from(sample_rate_hz) / 1000.0).round() as usize).max(2)
    }

    pub fn hop_samples(&self, sample_rate_hz: u32) -> usize {
        ((self.hop_ms * f64::from(sample_rate_hz) / 1000.0).round() as usize).max(1)
    }
}

/// Frame-by-frame magnitude spectra, `frames × bins`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    magnitudes: Vec<f64>,
    n_frames: usize,
    n_bins: usize,
    pub window_s: f64,
    pub hop_s: f64,
    pub bin_width_hz: f64,
    /// Time of the first frame's center, seconds.
    pub first_center_s: f64,
}

impl Spectrogram {
    pub fn new(
        magnitudes: Vec<f64>,
        n_bins: usize,
        window_s: f64,
        hop_s: f64,
        bin_width_hz: f64,
        first_center_s: f64,
    ) -> Result<Self, AudioError> {
        if n_bins == 0 || magnitudes.is_empty() || !magnitudes.len().is_multiple_of(n_bins) {
            return Err(AudioError::ConfigMismatch(format!(
                "{} magnitudes do not form whole frames of {n_bins} bins",
                magnitudes.len()
            )));
        }
        if magnitudes.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(AudioError::ConfigMismatch("magnitudes must be finite and non-negative".into()));
        }
        Ok(Self {
            n_frames: magnitudes.len() / n_bins,
            magnitudes,
            n_bins,
            window_s,
            hop_s,
            bin_width_hz,
            first_center_s,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        &self.magnitudes[i * self.n_bins..(i + 1) * self.n_bins]
    }

    pub fn frames(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.magnitudes.chunks_exact(self.n_bins)
    }

    pub fn bin_frequency(&self, b: usize) -> f64 {
        b as f64 * self.bin_width_hz
    }

    pub fn max_frequency(&self) -> f64 {
        self.bin_frequency(self.n_bins - 1)
    }

    pub fn frame_center(&self, i: usize) -> f64 {
        self.first_center_s + i as f64 * self.hop_s
    }

    pub(crate) fn map_magnitudes(&self, mut f: impl FnMut(usize, f64) -> f64) -> Self {
        let n_bins = self.n_bins;
        let magnitudes = self
            .magnitudes
            .iter()
            .enumerate()
            .map(|(i, &m)| f(i % n_bins, m))
            .collect();
        Self { magnitudes, ..self.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_rejects_out_of_range_samples() {
        assert!(AudioClip::new(vec![0.0, 1.5], 8000).is_err());
        assert!(AudioClip::new(vec![f64::NAN], 8000).is_err());
        assert!(matches!(AudioClip::new(vec![], 8000), Err(AudioError::EmptyFile)));
    }

    #[test]
    fn default_framing_at_8khz() {
        let cfg = CepstraConfig::default();
        assert_eq!(cfg.window_samples(8000), 128);
        assert_eq!(cfg.hop_samples(8000), 32);
    }
}
