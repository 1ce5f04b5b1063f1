//! Multichannel Wiener filter baseline.
//!
//! Per frequency bin the filter is
//! `w = (R_n + λI)⁻¹ R_s e₀ / (1 + tr((R_n + λI)⁻¹ R_s))` with `R_s` replaced by
//! its principal rank-1 component and `λ = 1e-3 · tr(R_n) / 2`. The output is
//! `wᴴ y`, time-invariant over the clip.

use nalgebra::{Matrix2, Vector2};
use rustfft::num_complex::Complex64;

use super::{frame_separate, frame_stream, Separator, SeparatorStream};
use crate::dsp::{FrameProcessor, Stft, StftConfig};
use crate::error::{Error, Result};

const CHANNELS: usize = 2;
const LOADING: f64 = 1e-3;

/// Per-bin 2×2 spatial covariance averaged over STFT frames.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSet {
    pub bins: Vec<Matrix2<Complex64>>,
    pub frames: usize,
    pub stft: StftConfig,
}

/// Averages `y yᴴ` over every frame of every two-channel clip.
pub fn estimate_covariance(clips: &[[&[f64]; 2]], config: StftConfig) -> Result<CovarianceSet> {
    let engine = Stft::new(config)?;
    let mut bins = vec![Matrix2::<Complex64>::zeros(); config.num_bins()];
    let mut frames = 0usize;
    for [a, b] in clips {
        super::check_pair(a, b)?;
        let sa = engine.stft(a)?;
        let sb = engine.stft(b)?;
        for (fa, fb) in sa.frames.iter().zip(&sb.frames) {
            for (k, r) in bins.iter_mut().enumerate() {
                let y = Vector2::new(fa[k], fb[k]);
                *r += y * y.adjoint();
            }
            frames += 1;
        }
    }
    if frames == 0 {
        return Err(Error::contract(
            "covariance estimation needs at least one clip",
        ));
    }
    let scale = Complex64::new(1.0 / frames as f64, 0.0);
    for r in &mut bins {
        *r *= scale;
    }
    Ok(CovarianceSet {
        bins,
        frames,
        stft: config,
    })
}

fn principal_component(r: &Matrix2<Complex64>) -> Matrix2<Complex64> {
    // Symmetrise first so round-off cannot leave an anti-Hermitian residue.
    let h = (r + r.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let i = eig.eigenvalues.imax();
    let sigma = eig.eigenvalues[i].max(0.0);
    let v = eig.eigenvectors.column(i).into_owned();
    v * v.adjoint() * Complex64::new(sigma, 0.0)
}

/// Filter weights per bin from signal and noise covariances.
pub fn mcwf_weights(
    signal: &CovarianceSet,
    noise: &CovarianceSet,
) -> Result<Vec<Vector2<Complex64>>> {
    if signal.bins.len() != noise.bins.len() {
        return Err(Error::contract(
            "signal and noise covariances use different framings",
        ));
    }
    signal
        .bins
        .iter()
        .zip(&noise.bins)
        .enumerate()
        .map(|(k, (rs, rn))| {
            let lambda = LOADING * rn.trace().re / CHANNELS as f64;
            let loaded = rn + Matrix2::identity() * Complex64::new(lambda, 0.0);
            let inv = loaded.try_inverse().ok_or_else(|| {
                Error::Numerical(format!(
                    "noise covariance at bin {k} is singular after loading (trace {:.3e}, lambda {lambda:.3e})",
                    rn.trace().re
                ))
            })?;
            let gain = inv * principal_component(rs);
            let denom = 1.0 + gain.trace().re;
            let w = gain.column(0) / Complex64::new(denom, 0.0);
            if w.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                return Err(Error::Numerical(format!("non-finite filter at bin {k}")));
            }
            Ok(w.into_owned())
        })
        .collect()
}

#[derive(Debug, Clone)]
struct McwfProcessor {
    weights: Vec<Vector2<Complex64>>,
}

impl FrameProcessor for McwfProcessor {
    fn num_channels(&self) -> usize {
        CHANNELS
    }

    fn process(&mut self, inputs: &[&[Complex64]], output: &mut [Complex64]) {
        for (k, (out, w)) in output.iter_mut().zip(&self.weights).enumerate() {
            *out = w[0].conj() * inputs[0][k] + w[1].conj() * inputs[1][k];
        }
    }
}

#[derive(Debug, Clone)]
pub struct McwfSeparator {
    pub weights: Vec<Vector2<Complex64>>,
    pub stft: StftConfig,
}

impl McwfSeparator {
    pub fn new(signal: &CovarianceSet, noise: &CovarianceSet) -> Result<Self> {
        if signal.stft != noise.stft {
            return Err(Error::contract(
                "signal and noise covariances use different framings",
            ));
        }
        Ok(McwfSeparator {
            weights: mcwf_weights(signal, noise)?,
            stft: signal.stft,
        })
    }

    /// Estimates both covariances from calibration clips and builds the filter.
    pub fn calibrate(
        signal_clips: &[[&[f64]; 2]],
        noise_clips: &[[&[f64]; 2]],
        config: StftConfig,
    ) -> Result<Self> {
        Self::new(
            &estimate_covariance(signal_clips, config)?,
            &estimate_covariance(noise_clips, config)?,
        )
    }

    fn processor(&self) -> Box<dyn FrameProcessor> {
        Box::new(McwfProcessor {
            weights: self.weights.clone(),
        })
    }
}

impl Separator for McwfSeparator {
    fn name(&self) -> String {
        "mcwf".into()
    }

    fn stream(&self) -> Result<Box<dyn SeparatorStream>> {
        frame_stream(self.stft, self.processor())
    }

    fn steered(&self, offset: f64) -> Result<Box<dyn Separator + '_>> {
        super::InputDelay::boxed(self, offset)
    }

    fn separate(&self, y0: &[f64], y1: &[f64]) -> Result<Vec<f64>> {
        frame_separate(self.stft, self.processor(), y0, y1)
    }
}

/// Applies the filter to a multichannel recording (exactly two channels).
pub fn mcwf_separate(
    y: &[&[f64]],
    signal: &CovarianceSet,
    noise: &CovarianceSet,
) -> Result<Vec<f64>> {
    if y.len() != CHANNELS {
        return Err(Error::contract(format!(
            "expected {CHANNELS} channels, got {}",
            y.len()
        )));
    }
    McwfSeparator::new(signal, noise)?.separate(y[0], y[1])
}
