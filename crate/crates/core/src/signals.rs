//! Synthetic source signals standing in for speech and noise recordings.
//!
//! All generators are deterministic in the supplied RNG and return unit-RMS
//! waveforms.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignalKind {
    /// Stationary pink noise.
    Pink,
    /// Pink noise under a 4 Hz syllabic envelope.
    SpeechLike,
    /// Harmonic complex with -6 dB/octave tilt and a syllabic envelope.
    Multitone,
    /// Pink noise switched on and off in random bursts.
    NoiseBurst,
}

/// Generator for stream `stream` of `seed`: independent sequences that do not
/// depend on the order in which they are drawn.
pub fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const LOW_CUTOFF_HZ: f64 = 50.0;

pub fn generate(kind: SignalKind, len: usize, sample_rate: u32, rng: &mut impl Rng) -> Vec<f64> {
    let fs = sample_rate as f64;
    let x = match kind {
        SignalKind::Pink => pink_noise(len, fs, rng),
        SignalKind::SpeechLike => {
            let noise = pink_noise(len, fs, rng);
            let env = syllabic_envelope(len, fs, rng);
            noise.iter().zip(&env).map(|(n, e)| n * e).collect()
        }
        SignalKind::Multitone => multitone(len, fs, rng),
        SignalKind::NoiseBurst => {
            let noise = pink_noise(len, fs, rng);
            let env = burst_envelope(len, fs, rng);
            noise.iter().zip(&env).map(|(n, e)| n * e).collect()
        }
    };
    normalize_rms(x)
}

fn normalize_rms(mut x: Vec<f64>) -> Vec<f64> {
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt();
    if rms > 0.0 {
        for v in &mut x {
            *v /= rms;
        }
    }
    x
}

/// Gaussian noise shaped to a 1/f power spectrum above 50 Hz.
pub fn pink_noise(len: usize, fs: f64, rng: &mut impl Rng) -> Vec<f64> {
    if len == 0 {
        return Vec::new();
    }
    let mut buf: Vec<Complex64> = (0..len)
        .map(|_| Complex64::new(StandardNormal.sample(rng), 0.0))
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(len).process(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        let bin = k.min(len - k);
        let f = bin as f64 * fs / len as f64;
        *v *= if f < LOW_CUTOFF_HZ {
            0.0
        } else {
            1.0 / f.sqrt()
        };
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    normalize_rms(buf.iter().map(|c| c.re).collect())
}

fn syllabic_envelope(len: usize, fs: f64, rng: &mut impl Rng) -> Vec<f64> {
    let rate = rng.random_range(3.5..4.5);
    let phase = rng.random_range(0.0..2.0 * PI);
    (0..len)
        .map(|n| {
            let t = n as f64 / fs;
            let hump = 0.5 * (1.0 - (2.0 * PI * rate * t + phase).cos());
            0.05 + 0.95 * hump * hump
        })
        .collect()
}

fn burst_envelope(len: usize, fs: f64, rng: &mut impl Rng) -> Vec<f64> {
    let mut env = vec![0.0; len];
    let mut pos = 0usize;
    let mut on = rng.random_bool(0.5);
    while pos < len {
        let dur = (rng.random_range(0.1..0.6) * fs) as usize;
        let end = (pos + dur.max(1)).min(len);
        if on {
            let ramp = (0.01 * fs) as usize;
            for (i, e) in env[pos..end].iter_mut().enumerate() {
                let edge = i.min(end - pos - 1 - i) as f64;
                *e = (edge / ramp.max(1) as f64).min(1.0);
            }
        }
        on = !on;
        pos = end;
    }
    env
}

fn multitone(len: usize, fs: f64, rng: &mut impl Rng) -> Vec<f64> {
    let f0 = rng.random_range(100.0..250.0);
    let harmonics = ((0.45 * fs) / f0).floor() as usize;
    let phases: Vec<f64> = (0..harmonics)
        .map(|_| rng.random_range(0.0..2.0 * PI))
        .collect();
    let env = syllabic_envelope(len, fs, rng);
    (0..len)
        .map(|n| {
            let t = n as f64 / fs;
            let mut acc = 0.0;
            for (h, ph) in phases.iter().enumerate() {
                let k = (h + 1) as f64;
                acc += (2.0 * PI * k * f0 * t + ph).sin() / k;
            }
            acc * env[n]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn band_power(x: &[f64], fs: f64, lo: f64, hi: f64) -> f64 {
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        FftPlanner::<f64>::new()
            .plan_fft_forward(x.len())
            .process(&mut buf);
        let n = x.len();
        buf.iter()
            .take(n / 2)
            .enumerate()
            .filter(|(k, _)| {
                let f = *k as f64 * fs / n as f64;
                f >= lo && f < hi
            })
            .map(|(_, c)| c.norm_sqr())
            .sum()
    }

    #[test]
    fn generators_are_unit_rms_and_deterministic() {
        for kind in [
            SignalKind::Pink,
            SignalKind::SpeechLike,
            SignalKind::Multitone,
            SignalKind::NoiseBurst,
        ] {
            let a = generate(kind, 16_000, 16_000, &mut ChaCha8Rng::seed_from_u64(3));
            let b = generate(kind, 16_000, 16_000, &mut ChaCha8Rng::seed_from_u64(3));
            assert_eq!(a, b);
            let rms = (a.iter().map(|v| v * v).sum::<f64>() / a.len() as f64).sqrt();
            assert!((rms - 1.0).abs() < 1e-12, "{kind:?}");
        }
    }

    #[test]
    fn pink_noise_has_equal_power_per_octave() {
        let x = pink_noise(64_000, 16_000.0, &mut ChaCha8Rng::seed_from_u64(9));
        let low = band_power(&x, 16_000.0, 250.0, 500.0);
        let high = band_power(&x, 16_000.0, 2000.0, 4000.0);
        let ratio_db = 10.0 * (low / high).log10();
        assert!(ratio_db.abs() < 1.0, "{ratio_db}");
        assert!(
            band_power(&x, 16_000.0, 0.0, 40.0) < 1e-12 * band_power(&x, 16_000.0, 40.0, 8000.0)
        );
    }
}
