use std::path::Path;

use crate::error::AudioError;

use super::AudioClip;

/// Reads a 16-bit PCM RIFF/WAVE file. Multi-channel audio is averaged to mono.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioClip, AudioError> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| map_hound(e, path))?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(AudioError::UnsupportedFormat(format!(
            "{:?} {}-bit samples (only 16-bit PCM is supported)",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    let channels = usize::from(spec.channels.max(1));
    let raw = reader
        .into_samples::<i16>()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| map_hound(e, path))?;
    if raw.len() < channels {
        return Err(AudioError::EmptyFile);
    }
    let samples: Vec<f64> = raw
        .chunks_exact(channels)
        .map(|frame| frame.iter().map(|&s| f64::from(s) / 32768.0).sum::<f64>() / channels as f64)
        .collect();
    if spec.sample_rate != 8000 {
        log::warn!(
            "{} is sampled at {} Hz; window and hop are converted using the actual rate",
            path.display(),
            spec.sample_rate
        );
    }
    AudioClip::new(samples, spec.sample_rate)
}

/// Writes a mono clip as 16-bit PCM, rounding and saturating each sample.
pub fn write_wav(path: impl AsRef<Path>, clip: &AudioClip) -> Result<(), AudioError> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate_hz(),
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| map_hound(e, path))?;
    for &s in clip.samples() {
        let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(q).map_err(|e| map_hound(e, path))?;
    }
    writer.finalize().map_err(|e| map_hound(e, path))
}

fn map_hound(e: hound::Error, path: &Path) -> AudioError {
    match e {
        hound::Error::IoError(source) => AudioError::Io { path: path.display().to_string(), source },
        other => AudioError::UnsupportedFormat(other.to_string()),
    }
}
