use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::AudioError;
use crate::exec::Execution;

use super::{AudioClip, CepstraConfig, Spectrogram};

/// Symmetric Hamming window of length `n`.
pub fn hamming(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let denom = (n - 1) as f64;
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / denom).cos())
        .collect()
}

/// Short-time magnitude spectra of Hamming-windowed frames.
///
/// Frame count is `floor((len - window) / hop) + 1`; bins `0..=window/2`.
pub fn stft(clip: &AudioClip, cfg: &CepstraConfig) -> Result<Spectrogram, AudioError> {
    stft_with(clip, cfg, Execution::default())
}

pub fn stft_with(clip: &AudioClip, cfg: &CepstraConfig, exec: Execution) -> Result<Spectrogram, AudioError> {
    cfg.validate()?;
    let rate = clip.sample_rate_hz();
    let window = cfg.window_samples(rate);
    let hop = cfg.hop_samples(rate);
    let samples = clip.samples();
    if samples.len() < window {
        return Err(AudioError::ClipTooShort { len: samples.len(), window });
    }
    let n_frames = (samples.len() - window) / hop + 1;
    let n_bins = window / 2 + 1;
    let taper = hamming(window);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(window);

    let frames = exec.map_indexed(n_frames, |i| {
        let start = i * hop;
        let mut buf: Vec<Complex<f64>> = samples[start..start + window]
            .iter()
            .zip(&taper)
            .map(|(&s, &w)| Complex::new(s * w, 0.0))
            .collect();
        fft.process(&mut buf);
        buf[..n_bins].iter().map(|c| c.norm()).collect::<Vec<f64>>()
    });

    let rate = f64::from(rate);
    Spectrogram::new(
        frames.concat(),
        n_bins,
        window as f64 / rate,
        hop as f64 / rate,
        rate / window as f64,
        window as f64 / (2.0 * rate),
    )
}
