use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowKind {
    /// Square root of the periodic Hann window.
    SqrtHann,
    /// Periodic Hann window.
    Hann,
    Rectangular,
}

impl WindowKind {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        let hann = |n: usize| 0.5 * (1.0 - (2.0 * PI * n as f64 / len as f64).cos());
        (0..len)
            .map(|n| match self {
                WindowKind::SqrtHann => hann(n).sqrt(),
                WindowKind::Hann => hann(n),
                WindowKind::Rectangular => 1.0,
            })
            .collect()
    }

    fn code(self) -> u8 {
        match self {
            WindowKind::SqrtHann => 0,
            WindowKind::Hann => 1,
            WindowKind::Rectangular => 2,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(WindowKind::SqrtHann),
            1 => Some(WindowKind::Hann),
            2 => Some(WindowKind::Rectangular),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftConfig {
    pub window_size: usize,
    pub hop_size: usize,
    pub fft_size: usize,
    pub window: WindowKind,
}

impl StftConfig {
    /// Separator framing: 320-sample window and FFT, 160-sample hop.
    pub const ANALYSIS: StftConfig = StftConfig {
        window_size: 320,
        hop_size: 160,
        fft_size: 320,
        window: WindowKind::SqrtHann,
    };

    /// Reconstruction-loss framing: 1024-sample window, 256-sample hop.
    pub const LOSS: StftConfig = StftConfig {
        window_size: 1024,
        hop_size: 256,
        fft_size: 1024,
        window: WindowKind::Hann,
    };

    pub fn num_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Checks sizes and the constant-overlap-add condition for the window
    /// used on both analysis and synthesis.
    pub fn validate(&self) -> Result<()> {
        if self.window_size == 0 || self.hop_size == 0 {
            return Err(Error::config("window and hop sizes must be positive"));
        }
        if self.fft_size < self.window_size {
            return Err(Error::config("fft size must be at least the window size"));
        }
        if self.hop_size > self.window_size {
            return Err(Error::config("hop larger than the window leaves gaps"));
        }
        overlap_norm(self).map(|_| ())
    }
}

impl Default for StftConfig {
    fn default() -> Self {
        StftConfig::ANALYSIS
    }
}

/// Sum of squared window values over all frames covering one sample; must be
/// the same for every sample position.
fn overlap_norm(config: &StftConfig) -> Result<f64> {
    let w = config.window.coefficients(config.window_size);
    let hop = config.hop_size;
    let sums: Vec<f64> = (0..hop)
        .map(|n| w.iter().skip(n).step_by(hop).map(|v| v * v).sum())
        .collect();
    let mean = sums.iter().sum::<f64>() / hop as f64;
    let dev = sums.iter().map(|s| (s - mean).abs()).fold(0.0, f64::max);
    if !(mean > 0.0) || dev > 1e-9 * mean {
        return Err(Error::config(format!(
            "{:?} window of {} with hop {} violates constant overlap-add (deviation {dev:.3e})",
            config.window, config.window_size, hop
        )));
    }
    Ok(mean)
}

/// Complex STFT frames. Frame `t` covers input samples
/// `[start_sample + t*hop, start_sample + t*hop + window)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub frames: Vec<Vec<Complex64>>,
    pub config: StftConfig,
    pub start_sample: i64,
    /// Length of the analysed waveform.
    pub num_samples: usize,
}

impl Spectrogram {
    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }

    /// Binary dump: magic `SPEC`, u32 version, u32 frames, u32 bins,
    /// u32 window, u32 hop, u32 fft, u8 window kind, i64 start sample,
    /// u64 sample count, then frames row-major as (re, im) f64 pairs.
    /// All little-endian.
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(b"SPEC")?;
        w.write_all(&1u32.to_le_bytes())?;
        w.write_all(&(self.frames.len() as u32).to_le_bytes())?;
        w.write_all(&(self.config.num_bins() as u32).to_le_bytes())?;
        w.write_all(&(self.config.window_size as u32).to_le_bytes())?;
        w.write_all(&(self.config.hop_size as u32).to_le_bytes())?;
        w.write_all(&(self.config.fft_size as u32).to_le_bytes())?;
        w.write_all(&[self.config.window.code()])?;
        w.write_all(&self.start_sample.to_le_bytes())?;
        w.write_all(&(self.num_samples as u64).to_le_bytes())?;
        for frame in &self.frames {
            for c in frame {
                w.write_all(&c.re.to_le_bytes())?;
                w.write_all(&c.im.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> std::io::Result<Self> {
        let bad = |m: &str| std::io::Error::new(std::io::ErrorKind::InvalidData, m.to_string());
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"SPEC" {
            return Err(bad("not a spectrogram dump"));
        }
        let mut u32s = [0u32; 6];
        for v in &mut u32s {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            *v = u32::from_le_bytes(b);
        }
        let [version, frames, bins, window_size, hop_size, fft_size] = u32s;
        if version != 1 {
            return Err(bad("unsupported spectrogram dump version"));
        }
        let mut kind = [0u8; 1];
        r.read_exact(&mut kind)?;
        let window = WindowKind::from_code(kind[0]).ok_or_else(|| bad("unknown window kind"))?;
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let start_sample = i64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let num_samples = u64::from_le_bytes(b8) as usize;
        let config = StftConfig {
            window_size: window_size as usize,
            hop_size: hop_size as usize,
            fft_size: fft_size as usize,
            window,
        };
        if config.num_bins() != bins as usize {
            return Err(bad("bin count inconsistent with fft size"));
        }
        let mut out = Vec::with_capacity(frames as usize);
        for _ in 0..frames {
            let mut frame = Vec::with_capacity(bins as usize);
            for _ in 0..bins {
                r.read_exact(&mut b8)?;
                let re = f64::from_le_bytes(b8);
                r.read_exact(&mut b8)?;
                frame.push(Complex64::new(re, f64::from_le_bytes(b8)));
            }
            out.push(frame);
        }
        Ok(Spectrogram {
            frames: out,
            config,
            start_sample,
            num_samples,
        })
    }
}

/// Planned transform for one [`StftConfig`]. The same window is used for
/// analysis and synthesis, normalised by the constant overlap sum.
#[derive(Clone)]
pub struct Stft {
    config: StftConfig,
    window: Vec<f64>,
    inv_overlap: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Stft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stft")
            .field("config", &self.config)
            .finish()
    }
}

impl Stft {
    pub fn new(config: StftConfig) -> Result<Self> {
        config.validate()?;
        let norm = overlap_norm(&config)?;
        let mut planner = FftPlanner::<f64>::new();
        Ok(Stft {
            config,
            window: config.window.coefficients(config.window_size),
            inv_overlap: 1.0 / norm,
            forward: planner.plan_fft_forward(config.fft_size),
            inverse: planner.plan_fft_inverse(config.fft_size),
        })
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    /// Reciprocal of the overlap-add normaliser applied after synthesis.
    pub fn synthesis_gain(&self) -> f64 {
        self.inv_overlap
    }

    /// Windowed FFT of one frame of `window_size` samples.
    pub fn analyze_frame(&self, frame: &[f64], out: &mut Vec<Complex64>) {
        let n = self.config.fft_size;
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for ((b, &x), &w) in buf.iter_mut().zip(frame).zip(&self.window) {
            b.re = x * w;
        }
        self.forward.process(&mut buf);
        out.clear();
        out.extend_from_slice(&buf[..self.config.num_bins()]);
    }

    /// Inverse FFT of one half spectrum, multiplied by the synthesis window.
    /// `out` receives `window_size` samples.
    pub fn synthesize_frame(&self, bins: &[Complex64], out: &mut [f64]) {
        let n = self.config.fft_size;
        let nb = self.config.num_bins();
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        buf[..nb].copy_from_slice(&bins[..nb]);
        for k in nb..n {
            buf[k] = bins[n - k].conj();
        }
        buf[0].im = 0.0;
        if n.is_multiple_of(2) {
            buf[n / 2].im = 0.0;
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / n as f64;
        for ((o, b), &w) in out.iter_mut().zip(&buf).zip(&self.window) {
            *o = b.re * scale * w;
        }
    }

    pub fn stft(&self, x: &[f64]) -> Result<Spectrogram> {
        let w = self.config.window_size;
        if x.len() < w {
            return Err(Error::contract(format!(
                "waveform of {} samples is shorter than the {w}-sample window",
                x.len()
            )));
        }
        let n_frames = (x.len() - w) / self.config.hop_size + 1;
        let frames = (0..n_frames)
            .map(|t| {
                let start = t * self.config.hop_size;
                let mut out = Vec::new();
                self.analyze_frame(&x[start..start + w], &mut out);
                out
            })
            .collect();
        Ok(Spectrogram {
            frames,
            config: self.config,
            start_sample: 0,
            num_samples: x.len(),
        })
    }

    /// Overlap-add synthesis back to `spec.num_samples` samples.
    pub fn istft(&self, spec: &Spectrogram) -> Result<Vec<f64>> {
        if spec.config != self.config {
            return Err(Error::contract(
                "spectrogram was produced with another configuration",
            ));
        }
        let w = self.config.window_size;
        let hop = self.config.hop_size as i64;
        let mut acc = vec![0.0; spec.num_samples];
        let mut frame = vec![0.0; w];
        for (t, bins) in spec.frames.iter().enumerate() {
            self.synthesize_frame(bins, &mut frame);
            let start = spec.start_sample + t as i64 * hop;
            for (i, v) in frame.iter().enumerate() {
                let n = start + i as i64;
                if n >= 0 && (n as usize) < acc.len() {
                    acc[n as usize] += v;
                }
            }
        }
        for v in &mut acc {
            *v *= self.inv_overlap;
        }
        Ok(acc)
    }
}

pub fn stft(x: &[f64], config: StftConfig) -> Result<Spectrogram> {
    Stft::new(config)?.stft(x)
}

pub fn istft(spec: &Spectrogram) -> Result<Vec<f64>> {
    Stft::new(spec.config)?.istft(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn default_framings_are_cola() {
        StftConfig::ANALYSIS.validate().unwrap();
        StftConfig::LOSS.validate().unwrap();
        let bad = StftConfig {
            hop_size: 100,
            ..StftConfig::ANALYSIS
        };
        assert!(matches!(Stft::new(bad), Err(Error::Config(_))));
    }

    #[test]
    fn zeros_map_to_zeros() {
        let spec = stft(&vec![0.0; 1000], StftConfig::ANALYSIS).unwrap();
        assert!(spec.frames.iter().flatten().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn bin_centred_sinusoid_concentrates() {
        let cfg = StftConfig {
            window_size: 320,
            hop_size: 320,
            fft_size: 320,
            window: WindowKind::Rectangular,
        };
        let k = 17.0;
        let x: Vec<f64> = (0..640)
            .map(|n| (2.0 * PI * k * n as f64 / 320.0).cos())
            .collect();
        let spec = stft(&x, cfg).unwrap();
        let frame = &spec.frames[0];
        let total: f64 = frame.iter().map(|c| c.norm_sqr()).sum();
        assert!(frame[17].norm_sqr() / total >= 0.99);
    }

    #[test]
    fn parseval_per_frame() {
        let cfg = StftConfig::ANALYSIS;
        let engine = Stft::new(cfg).unwrap();
        let x = noise(320, 4);
        let mut bins = Vec::new();
        engine.analyze_frame(&x, &mut bins);
        let time: f64 = x
            .iter()
            .zip(engine.window())
            .map(|(v, w)| (v * w).powi(2))
            .sum();
        let n = cfg.fft_size;
        let freq: f64 = bins
            .iter()
            .enumerate()
            .map(|(k, c)| {
                if k == 0 || k == n / 2 {
                    c.norm_sqr()
                } else {
                    2.0 * c.norm_sqr()
                }
            })
            .sum::<f64>()
            / n as f64;
        assert!((time - freq).abs() <= 1e-6 * time);
    }

    #[test]
    fn round_trip_interior() {
        for cfg in [StftConfig::ANALYSIS, StftConfig::LOSS] {
            let x = noise(16_000, 8);
            let y = istft(&stft(&x, cfg).unwrap()).unwrap();
            let w = cfg.window_size;
            let err: f64 = x[w..x.len() - w]
                .iter()
                .zip(&y[w..])
                .map(|(a, b)| (a - b).powi(2))
                .sum();
            let norm: f64 = x[w..x.len() - w].iter().map(|a| a * a).sum();
            let snr = 10.0 * (norm / err).log10();
            assert!(snr >= 120.0, "{cfg:?}: {snr}");
        }
    }

    #[test]
    fn impulse_position_survives_round_trip() {
        let mut x = vec![0.0; 3200];
        x[1234] = 1.0;
        let y = istft(&stft(&x, StftConfig::ANALYSIS).unwrap()).unwrap();
        let peak = y
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(peak, 1234);
    }

    #[test]
    fn dump_round_trip() {
        let spec = stft(&noise(1000, 2), StftConfig::ANALYSIS).unwrap();
        let mut bytes = Vec::new();
        spec.write_to(&mut bytes).unwrap();
        assert_eq!(Spectrogram::read_from(bytes.as_slice()).unwrap(), spec);
        assert!(Spectrogram::read_from(&b"JUNK"[..]).is_err());
    }

    #[test]
    fn short_input_rejected() {
        assert!(matches!(
            stft(&[0.0; 100], StftConfig::ANALYSIS),
            Err(Error::Contract(_))
        ));
    }
}
