use serde::{Deserialize, Serialize};

use crate::error::AudioError;

use super::Spectrogram;

/// Band-edge attenuation with Hamming half-window roll-offs.
///
/// Gain ramps as `0.54 - 0.46 cos(pi d / rolloff)` where `d` is the distance
/// from the outer band edge, so the outermost frequencies keep gain 0.08 and
/// the passband `[low_cutoff_hz, high_cutoff_hz]` keeps gain 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelFilterSpec {
    pub low_cutoff_hz: f64,
    pub high_cutoff_hz: f64,
    pub rolloff_hz: f64,
}

impl Default for ChannelFilterSpec {
    fn default() -> Self {
        Self { low_cutoff_hz: 500.0, high_cutoff_hz: 3500.0, rolloff_hz: 500.0 }
    }
}

/// Gain at the outer band edges, `0.54 - 0.46`.
pub const MIN_GAIN: f64 = 0.08;

impl ChannelFilterSpec {
    pub fn gain(&self, f: f64) -> f64 {
        let ramp = |d: f64| {
            let x = (d / self.rolloff_hz).clamp(0.0, 1.0);
            0.54 - 0.46 * (std::f64::consts::PI * x).cos()
        };
        if f < self.low_cutoff_hz {
            ramp(f - (self.low_cutoff_hz - self.rolloff_hz))
        } else if f > self.high_cutoff_hz {
            ramp(self.high_cutoff_hz + self.rolloff_hz - f)
        } else {
            1.0
        }
    }

    fn validate(&self, nyquist_hz: f64) -> Result<(), AudioError> {
        let low_edge = self.low_cutoff_hz - self.rolloff_hz;
        let high_edge = self.high_cutoff_hz + self.rolloff_hz;
        if !(self.rolloff_hz > 0.0) {
            return Err(AudioError::BandOutOfRange(format!("rolloff {} Hz must be positive", self.rolloff_hz)));
        }
        if low_edge < 0.0 || self.low_cutoff_hz > self.high_cutoff_hz {
            return Err(AudioError::BandOutOfRange(format!(
                "low band [{low_edge}, {}] Hz is not inside [0, {}]",
                self.low_cutoff_hz, self.high_cutoff_hz
            )));
        }
        if high_edge > nyquist_hz + 1e-9 {
            return Err(AudioError::BandOutOfRange(format!(
                "high band [{}, {high_edge}] Hz exceeds the spectrum's {nyquist_hz} Hz",
                self.high_cutoff_hz
            )));
        }
        Ok(())
    }
}

/// Multiplies every bin by the filter gain at its center frequency.
pub fn apply_channel_filter(spec: &Spectrogram, filt: &ChannelFilterSpec) -> Result<Spectrogram, AudioError> {
    filt.validate(spec.max_frequency())?;
    let gains: Vec<f64> = (0..spec.n_bins()).map(|b| filt.gain(spec.bin_frequency(b))).collect();
    Ok(spec.map_magnitudes(|b, m| m * gains[b]))
}
