//! WAV input/output. Reads PCM int16 or float32, always writes float32.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Audio {
    pub sample_rate: u32,
    /// One buffer per channel.
    pub channels: Vec<Vec<f64>>,
}

impl Audio {
    pub fn num_frames(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    /// Average of all channels.
    pub fn mono(&self) -> Vec<f64> {
        let n = self.channels.len().max(1) as f64;
        (0..self.num_frames())
            .map(|i| self.channels.iter().map(|c| c[i]).sum::<f64>() / n)
            .collect()
    }
}

/// Zero crossings of the resampling kernel on each side.
const RESAMPLE_ZEROS: f64 = 16.0;

/// Band-limited resampling with a Hann-windowed sinc whose cutoff follows the
/// lower of the two Nyquist frequencies.
pub fn resample(x: &[f64], from: u32, to: u32) -> Vec<f64> {
    if from == to || x.is_empty() {
        return x.to_vec();
    }
    let ratio = from as f64 / to as f64;
    let cutoff = (1.0 / ratio).min(1.0);
    let half = RESAMPLE_ZEROS / cutoff;
    let out_len = ((x.len() as f64) / ratio).round() as usize;
    (0..out_len)
        .map(|m| {
            let t = m as f64 * ratio;
            let lo = (t - half).ceil().max(0.0) as usize;
            let hi = ((t + half).floor() as usize).min(x.len() - 1);
            let mut acc = 0.0;
            for (n, &v) in x.iter().enumerate().take(hi + 1).skip(lo) {
                let u = t - n as f64;
                let arg = std::f64::consts::PI * cutoff * u;
                let sinc = if arg == 0.0 { 1.0 } else { arg.sin() / arg };
                let w = 0.5 * (1.0 + (std::f64::consts::PI * u / half).cos());
                acc += v * cutoff * sinc * w;
            }
            acc
        })
        .collect()
}

fn wav_err(path: &Path, source: hound::Error) -> Error {
    match source {
        hound::Error::IoError(e) => Error::io(path, e),
        other => Error::Wav {
            path: path.into(),
            source: other,
        },
    }
}

pub fn read(path: &Path) -> Result<Audio> {
    let reader = WavReader::open(path).map_err(|e| wav_err(path, e))?;
    let spec = reader.spec();
    let n_ch = spec.channels as usize;
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| wav_err(path, e))?,
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| wav_err(path, e))?,
        (fmt, bits) => {
            return Err(Error::Format {
                path: path.into(),
                message: format!("unsupported sample format {fmt:?} with {bits} bits"),
            })
        }
    };
    let mut channels = vec![Vec::with_capacity(interleaved.len() / n_ch.max(1)); n_ch];
    for frame in interleaved.chunks(n_ch) {
        for (ch, &s) in channels.iter_mut().zip(frame) {
            ch.push(s);
        }
    }
    Ok(Audio {
        sample_rate: spec.sample_rate,
        channels,
    })
}

pub fn write_f32(path: &Path, channels: &[&[f64]], sample_rate: u32) -> Result<()> {
    if channels.is_empty() || channels.iter().any(|c| c.len() != channels[0].len()) {
        return Err(Error::contract(
            "channels must be non-empty and of equal length",
        ));
    }
    let spec = WavSpec {
        channels: channels.len() as u16,
        sample_rate,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let mut writer = WavWriter::create(path, spec).map_err(|e| wav_err(path, e))?;
    for i in 0..channels[0].len() {
        for ch in channels {
            writer
                .write_sample(ch[i] as f32)
                .map_err(|e| wav_err(path, e))?;
        }
    }
    writer.finalize().map_err(|e| wav_err(path, e))
}

pub fn write_mono_f32(path: &Path, samples: &[f64], sample_rate: u32) -> Result<()> {
    write_f32(path, &[samples], sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resampling_preserves_in_band_tones() {
        let tone = |fs: f64, n: usize| -> Vec<f64> {
            (0..n)
                .map(|i| (2.0 * std::f64::consts::PI * 440.0 * i as f64 / fs).sin())
                .collect()
        };
        let src = tone(48_000.0, 48_000);
        let out = resample(&src, 48_000, 16_000);
        assert_eq!(out.len(), 16_000);
        let want = tone(16_000.0, 16_000);
        let err = out[200..15_800]
            .iter()
            .zip(&want[200..15_800])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 2e-3, "{err}");
        let up = resample(&want, 16_000, 22_050);
        let up_want = tone(22_050.0, up.len());
        let err = up[300..up.len() - 300]
            .iter()
            .zip(&up_want[300..])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 2e-3, "{err}");
    }

    #[test]
    fn downsampling_rejects_content_above_the_new_nyquist() {
        let src: Vec<f64> = (0..48_000)
            .map(|i| (2.0 * std::f64::consts::PI * 12_000.0 * i as f64 / 48_000.0).sin())
            .collect();
        let out = resample(&src, 48_000, 16_000);
        let rms = (out[200..15_800].iter().map(|v| v * v).sum::<f64>() / 15_600.0).sqrt();
        assert!(rms < 0.01, "{rms}");
    }

    #[test]
    fn float_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.wav");
        let a = vec![0.25, -0.5, 0.125];
        let b = vec![1.0, 0.0, -1.0];
        write_f32(&path, &[&a, &b], 16_000).unwrap();
        let audio = read(&path).unwrap();
        assert_eq!(audio.sample_rate, 16_000);
        assert_eq!(audio.channels, vec![a, b]);
    }

    #[test]
    fn int16_is_scaled() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("i.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: 8_000,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(&path, spec).unwrap();
        w.write_sample(16384i16).unwrap();
        w.write_sample(-32768i16).unwrap();
        w.finalize().unwrap();
        assert_eq!(read(&path).unwrap().channels[0], vec![0.5, -1.0]);
    }

    #[test]
    fn corrupt_header_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.wav");
        std::fs::write(&path, b"RIFFnonsense-not-a-wave").unwrap();
        let err = read(&path).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(matches!(err, Error::Wav { .. }));
    }
}
