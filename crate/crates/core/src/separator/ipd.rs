//! Delay-contrast separation with an inter-microphone phase difference mask.
//!
//! A bin is kept when its observed phase difference is explained by a time
//! difference of arrival inside `[-tau_max, tau_max]` and attenuated towards
//! `mask_floor` as the wrapped phase distance to that set grows. Steering
//! delays microphone 1 by a fixed number of samples, which moves the accepted
//! TDOA band with it.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{frame_separate, frame_stream, Separator, SeparatorStream};
use crate::dsp::{FrameProcessor, StftConfig, DEFAULT_MAX_OFFSET};
use crate::error::{Error, Result};
use crate::geometry::SPEED_OF_SOUND;

/// Spacing the default TDOA band is derived from, in metres.
pub const NOMINAL_SPACING: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeparatorConfig {
    /// Half-width of the accepted TDOA band in seconds.
    pub tau_max: f64,
    /// Width of the raised-cosine falloff in radians of phase distance.
    pub mask_softness: f64,
    pub mask_floor: f64,
    /// Delay applied to microphone 1 before masking, in samples.
    pub steering_offset: f64,
    pub max_offset: f64,
    pub sample_rate: u32,
    pub stft: StftConfig,
}

impl Default for SeparatorConfig {
    fn default() -> Self {
        SeparatorConfig {
            tau_max: NOMINAL_SPACING * 30f64.to_radians().sin() / SPEED_OF_SOUND,
            mask_softness: 0.5,
            mask_floor: 0.05,
            steering_offset: 0.0,
            max_offset: DEFAULT_MAX_OFFSET,
            sample_rate: 16_000,
            stft: StftConfig::ANALYSIS,
        }
    }
}

impl SeparatorConfig {
    pub fn validate(&self) -> Result<()> {
        let endfire = NOMINAL_SPACING / SPEED_OF_SOUND;
        if !(self.tau_max > 0.0 && self.tau_max < endfire) {
            return Err(Error::config(format!(
                "tau_max must lie in (0, {:.1} us), got {:.1} us",
                endfire * 1e6,
                self.tau_max * 1e6
            )));
        }
        if !(self.mask_softness > 0.0) || !self.mask_softness.is_finite() {
            return Err(Error::config("mask_softness must be positive"));
        }
        if !(0.0..1.0).contains(&self.mask_floor) {
            return Err(Error::config(format!(
                "mask_floor must lie in [0, 1), got {}",
                self.mask_floor
            )));
        }
        if self.sample_rate == 0 {
            return Err(Error::config("sample rate must be positive"));
        }
        if !self.steering_offset.is_finite() || self.steering_offset.abs() > self.max_offset {
            return Err(Error::contract(format!(
                "steering offset {} outside ±{}",
                self.steering_offset, self.max_offset
            )));
        }
        self.stft.validate()
    }
}

/// Returns `config` steered by `offset` samples; offset 0 is the unsteered
/// configuration.
pub fn steer(config: &SeparatorConfig, offset: f64) -> Result<SeparatorConfig> {
    let steered = SeparatorConfig {
        steering_offset: offset,
        ..*config
    };
    steered.validate()?;
    Ok(steered)
}

/// Real per-bin gains for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskFrame {
    pub gains: Vec<f64>,
}

/// Per-bin constants of a configured mask.
#[derive(Debug, Clone)]
struct MaskTable {
    /// Largest admissible phase difference per bin; `None` once it covers ±π.
    phase_limit: Vec<Option<f64>>,
    /// Phase rotation applied to microphone 1 (the steering delay).
    rotation: Vec<Complex64>,
    softness: f64,
    floor: f64,
}

impl MaskTable {
    fn new(config: &SeparatorConfig) -> Result<Self> {
        config.validate()?;
        let n = config.stft.fft_size as f64;
        let fs = config.sample_rate as f64;
        let bins = config.stft.num_bins();
        let phase_limit = (0..bins)
            .map(|k| {
                let limit = 2.0 * PI * (k as f64 * fs / n) * config.tau_max;
                (limit < PI).then_some(limit)
            })
            .collect();
        let rotation = (0..bins)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 * config.steering_offset / n))
            .collect();
        Ok(MaskTable {
            phase_limit,
            rotation,
            softness: config.mask_softness,
            floor: config.mask_floor,
        })
    }

    fn gain(&self, k: usize, y0: Complex64, y1: Complex64) -> f64 {
        let Some(limit) = self.phase_limit[k] else {
            return 1.0;
        };
        // arg() already wraps into (-π, π].
        let phase = (y0 * (y1 * self.rotation[k]).conj()).arg();
        let dist = (phase.abs() - limit).max(0.0);
        if dist >= self.softness {
            return self.floor;
        }
        let shape = 0.5 * (1.0 + (PI * dist / self.softness).cos());
        (self.floor + (1.0 - self.floor) * shape).clamp(self.floor, 1.0)
    }
}

/// Mask for one pair of microphone spectra.
pub fn ipd_mask(y0: &[Complex64], y1: &[Complex64], config: &SeparatorConfig) -> Result<MaskFrame> {
    let table = MaskTable::new(config)?;
    if y0.len() != table.phase_limit.len() || y1.len() != y0.len() {
        return Err(Error::contract(format!(
            "mask expects {} bins per channel",
            table.phase_limit.len()
        )));
    }
    Ok(MaskFrame {
        gains: (0..y0.len()).map(|k| table.gain(k, y0[k], y1[k])).collect(),
    })
}

/// Frame processor applying the mask to microphone 0.
#[derive(Debug, Clone)]
pub struct IpdProcessor {
    table: MaskTable,
}

impl IpdProcessor {
    pub fn new(config: &SeparatorConfig) -> Result<Self> {
        Ok(IpdProcessor {
            table: MaskTable::new(config)?,
        })
    }
}

impl FrameProcessor for IpdProcessor {
    fn num_channels(&self) -> usize {
        2
    }

    fn process(&mut self, inputs: &[&[Complex64]], output: &mut [Complex64]) {
        let (y0, y1) = (inputs[0], inputs[1]);
        for (k, out) in output.iter_mut().enumerate() {
            *out = y0[k] * self.table.gain(k, y0[k], y1[k]);
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IpdSeparator {
    pub config: SeparatorConfig,
}

impl IpdSeparator {
    pub fn new(config: SeparatorConfig) -> Result<Self> {
        config.validate()?;
        Ok(IpdSeparator { config })
    }
}

impl Separator for IpdSeparator {
    fn name(&self) -> String {
        if self.config.steering_offset == 0.0 {
            "ipd".into()
        } else {
            format!("ipd(offset={:+})", self.config.steering_offset)
        }
    }

    fn stream(&self) -> Result<Box<dyn SeparatorStream>> {
        frame_stream(self.config.stft, Box::new(IpdProcessor::new(&self.config)?))
    }

    /// Native steering: the delay is folded into the per-bin phase rotation,
    /// so the steered separator stays causal and streamable.
    fn steered(&self, offset: f64) -> Result<Box<dyn Separator + '_>> {
        let config = steer(&self.config, self.config.steering_offset + offset)?;
        Ok(Box::new(IpdSeparator { config }))
    }

    fn separate(&self, y0: &[f64], y1: &[f64]) -> Result<Vec<f64>> {
        frame_separate(
            self.config.stft,
            Box::new(IpdProcessor::new(&self.config)?),
            y0,
            y1,
        )
    }
}

/// Separates a two-channel recording, output aligned with `y0`.
pub fn ipd_separate(
    y0: &[f64],
    y1: &[f64],
    sample_rate: u32,
    config: &SeparatorConfig,
) -> Result<Vec<f64>> {
    if sample_rate != config.sample_rate {
        return Err(Error::contract(format!(
            "input sampled at {sample_rate} Hz, separator configured for {} Hz",
            config.sample_rate
        )));
    }
    IpdSeparator::new(*config)?.separate(y0, y1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::stft;
    use crate::separator::separate_streaming;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn default_band_is_thirty_degrees_at_ten_centimetres() {
        let c = SeparatorConfig::default();
        assert!((c.tau_max - 0.05 / 343.0).abs() < 1e-15);
        c.validate().unwrap();
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        let d = SeparatorConfig::default();
        for bad in [
            SeparatorConfig { tau_max: 0.0, ..d },
            SeparatorConfig { tau_max: 3e-4, ..d },
            SeparatorConfig {
                mask_floor: 1.0,
                ..d
            },
            SeparatorConfig {
                mask_softness: 0.0,
                ..d
            },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config(_))));
        }
        assert!(matches!(steer(&d, 9.0), Err(Error::Contract(_))));
        assert_eq!(steer(&d, 0.0).unwrap(), d);
    }

    #[test]
    fn mask_closed_form() {
        let cfg = SeparatorConfig::default();
        let bins = cfg.stft.num_bins();
        // Bin 20 is 1 kHz: admissible phase 2π·1000·tau_max ≈ 0.916 rad.
        let limit = 2.0 * PI * 1000.0 * cfg.tau_max;
        for (phase, expect) in [
            (0.0, 1.0),
            (limit, 1.0),
            (limit + 0.25, cfg.mask_floor + (1.0 - cfg.mask_floor) * 0.5),
            (limit + 0.5, cfg.mask_floor),
            (-(limit + 1.0), cfg.mask_floor),
        ] {
            let mut y0 = vec![Complex64::new(1.0, 0.0); bins];
            let y1 = vec![Complex64::new(1.0, 0.0); bins];
            y0[20] = Complex64::from_polar(1.0, phase);
            let m = ipd_mask(&y0, &y1, &cfg).unwrap();
            assert!(
                (m.gains[20] - expect).abs() < 1e-12,
                "{phase}: {}",
                m.gains[20]
            );
        }
    }

    #[test]
    fn mask_is_permissive_once_band_covers_the_circle() {
        let cfg = SeparatorConfig::default();
        // 2π·f·tau_max ≥ π above f = 1/(2·tau_max) ≈ 3.43 kHz.
        let bins = cfg.stft.num_bins();
        let y0 = vec![Complex64::new(1.0, 0.0); bins];
        let y1 = vec![Complex64::new(-1.0, 0.0); bins];
        let m = ipd_mask(&y0, &y1, &cfg).unwrap();
        assert!(m.gains[..50].iter().all(|&g| g == cfg.mask_floor));
        assert!(m.gains[70..].iter().all(|&g| g == 1.0));
    }

    #[test]
    fn masks_stay_within_bounds() {
        let cfg = SeparatorConfig {
            mask_floor: 0.2,
            ..Default::default()
        };
        let a = stft(&noise(2000, 1), cfg.stft).unwrap();
        let b = stft(&noise(2000, 2), cfg.stft).unwrap();
        for (fa, fb) in a.frames.iter().zip(&b.frames) {
            for g in ipd_mask(fa, fb, &cfg).unwrap().gains {
                assert!((0.2..=1.0).contains(&g));
            }
        }
    }

    #[test]
    fn identical_channels_pass_through() {
        let x = noise(8000, 3);
        for floor in [0.0, 0.05, 0.5] {
            let cfg = SeparatorConfig {
                mask_floor: floor,
                ..Default::default()
            };
            let y = ipd_separate(&x, &x, 16_000, &cfg).unwrap();
            let err = x
                .iter()
                .zip(&y)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-6, "{err}");
        }
    }

    #[test]
    fn streaming_matches_offline() {
        let a = noise(6000, 4);
        let b = crate::fracdelay::delay_signal(&a, 3.3);
        let sep = IpdSeparator::new(steer(&SeparatorConfig::default(), 2.0).unwrap()).unwrap();
        let offline = sep.separate(&a, &b).unwrap();
        for chunk in [1, 7, 160, 320] {
            let streamed = separate_streaming(&sep, &a, &b, chunk).unwrap();
            assert_eq!(streamed, offline, "chunk {chunk}");
        }
    }

    #[test]
    fn sample_rate_mismatch_is_rejected() {
        let x = noise(1000, 5);
        assert!(ipd_separate(&x, &x, 48_000, &SeparatorConfig::default()).is_err());
        assert!(ipd_separate(&x, &x[1..], 16_000, &SeparatorConfig::default()).is_err());
    }
}
