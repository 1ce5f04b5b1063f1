//! Two-channel mixture synthesis from a [`RirMatrix`].
//!
//! Component k (s1, s2, interference, noise) is convolved with the responses
//! r(k,0) and r(k,1). Each reverberant component is scaled so its average
//! power at microphone 0 equals its sampled gain in dBFS, then the whole
//! mixture is scaled so its power at microphone 0 equals the global gain.
//! The ground truth reuses those scale factors on the anechoic target paths.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::RoomSpec;
use crate::rir::{Rir, RirMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalDb {
    pub mean: f64,
    /// Standard deviation in dB.
    pub std: f64,
}

impl NormalDb {
    pub const fn new(mean: f64, std: f64) -> Self {
        NormalDb { mean, std }
    }

    fn sample(&self, rng: &mut impl Rng) -> Result<f64> {
        let dist = Normal::new(self.mean, self.std)
            .map_err(|e| Error::config(format!("gain distribution {self:?}: {e}")))?;
        Ok(dist.sample(rng))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GainConfig {
    pub g0: NormalDb,
    pub g1: NormalDb,
    pub g2: NormalDb,
    pub g3: NormalDb,
    pub g_global: NormalDb,
}

impl Default for GainConfig {
    fn default() -> Self {
        GainConfig {
            g0: NormalDb::new(0.0, 0.0),
            g1: NormalDb::new(-3.0, 3.0),
            g2: NormalDb::new(-3.0, 3.0),
            g3: NormalDb::new(-5.0, 10.0),
            g_global: NormalDb::new(-10.0, 5.0),
        }
    }
}

/// Per-component gains in dB for target1, target2, interference, noise, and
/// the global mixture level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainSpec {
    pub g0: f64,
    pub g1: f64,
    pub g2: f64,
    pub g3: f64,
    pub g_global: f64,
}

impl GainSpec {
    pub fn component(&self, k: usize) -> f64 {
        [self.g0, self.g1, self.g2, self.g3][k]
    }
}

pub fn sample_gains(config: &GainConfig, seed: u64) -> Result<GainSpec> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    sample_gains_with(config, &mut rng)
}

pub fn sample_gains_with(config: &GainConfig, rng: &mut impl Rng) -> Result<GainSpec> {
    Ok(GainSpec {
        g0: config.g0.sample(rng)?,
        g1: config.g1.sample(rng)?,
        g2: config.g2.sample(rng)?,
        g3: config.g3.sample(rng)?,
        g_global: config.g_global.sample(rng)?,
    })
}

/// Source waveforms; an empty vector marks an absent component.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SceneSignals {
    pub s1: Vec<f64>,
    pub s2: Vec<f64>,
    pub i: Vec<f64>,
    pub n: Vec<f64>,
}

impl SceneSignals {
    pub fn components(&self) -> [&[f64]; 4] {
        [&self.s1, &self.s2, &self.i, &self.n]
    }

    /// Common length of the non-empty components.
    pub fn duration(&self) -> Result<usize> {
        let mut len = None;
        for c in self.components() {
            if c.is_empty() {
                continue;
            }
            match len {
                None => len = Some(c.len()),
                Some(l) if l != c.len() => {
                    return Err(Error::config(format!(
                        "component lengths differ ({l} vs {})",
                        c.len()
                    )))
                }
                _ => {}
            }
        }
        len.ok_or_else(|| Error::contract("scene has no signals"))
    }
}

/// Crops or zero-pads `x` to `len` samples.
pub fn fit_length(mut x: Vec<f64>, len: usize) -> Vec<f64> {
    x.resize(len, 0.0);
    x
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureScene {
    pub y0: Vec<f64>,
    pub y1: Vec<f64>,
    /// Anechoic targets at microphone 0, level-consistent with the mixture.
    pub t: Vec<f64>,
    /// Reverberant contribution of each component at [mic 0, mic 1]; silent
    /// components are all zeros.
    pub stems: Vec<[Vec<f64>; 2]>,
    pub room: RoomSpec,
    pub gains: GainSpec,
    /// Linear factor applied to each component before global scaling
    /// (zero for absent components).
    pub component_scales: [f64; 4],
    pub global_scale: f64,
    pub present: [bool; 4],
}

impl MixtureScene {
    /// Average power of component `k` at microphone 0 before global scaling, dB.
    pub fn component_power_db(&self, k: usize) -> f64 {
        power_db(&self.stems[k][0]) - 20.0 * self.global_scale.log10()
    }

    pub fn mixture_power_db(&self) -> f64 {
        power_db(&self.y0)
    }

    pub fn len(&self) -> usize {
        self.y0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y0.is_empty()
    }
}

pub fn mean_power(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// Average power in dB relative to full scale 1.0.
pub fn power_db(x: &[f64]) -> f64 {
    10.0 * mean_power(x).log10()
}

fn db_to_amplitude(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

/// Full linear convolution of `signal` with `rir`, cropped to the signal length.
pub fn convolve(signal: &[f64], rir: &Rir) -> Vec<f64> {
    let mut full = fft_convolve(signal, &rir.samples);
    full.truncate(signal.len());
    full
}

/// Full linear convolution (length `a.len() + b.len() - 1`) through the FFT.
pub fn fft_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    let n = out_len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut fa = vec![Complex64::new(0.0, 0.0); n];
    let mut fb = vec![Complex64::new(0.0, 0.0); n];
    for (d, &v) in fa.iter_mut().zip(a) {
        d.re = v;
    }
    for (d, &v) in fb.iter_mut().zip(b) {
        d.re = v;
    }
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    let scale = 1.0 / n as f64;
    fa[..out_len].iter().map(|c| c.re * scale).collect()
}

/// Builds the two-channel mixture, its stems and the anechoic ground truth.
pub fn synthesize(
    room: &RoomSpec,
    rirs: &RirMatrix,
    signals: &SceneSignals,
    gains: &GainSpec,
) -> Result<MixtureScene> {
    if signals.s1.is_empty() {
        return Err(Error::contract("target s1 must always be present"));
    }
    if rirs.entries.len() != 4 {
        return Err(Error::contract(format!(
            "expected a 4x2 response matrix, got {} sources",
            rirs.entries.len()
        )));
    }
    let len = signals.duration()?;

    let mut raw: Vec<[Vec<f64>; 2]> = Vec::with_capacity(4);
    let mut present = [false; 4];
    let mut scales = [0.0; 4];
    for (k, src) in signals.components().into_iter().enumerate() {
        if src.is_empty() {
            raw.push([vec![0.0; len], vec![0.0; len]]);
            continue;
        }
        let at0 = convolve(src, rirs.get(k, 0));
        let at1 = convolve(src, rirs.get(k, 1));
        let p = mean_power(&at0);
        if p > 0.0 {
            present[k] = true;
            scales[k] = db_to_amplitude(gains.component(k)) / p.sqrt();
        }
        raw.push([at0, at1]);
    }

    let mut pre = vec![0.0; len];
    for k in 0..4 {
        for (acc, v) in pre.iter_mut().zip(&raw[k][0]) {
            *acc += scales[k] * v;
        }
    }
    let pre_power = mean_power(&pre);
    if !(pre_power > 0.0) {
        return Err(Error::degenerate("mixture is silent at microphone 0"));
    }
    let global = db_to_amplitude(gains.g_global) / pre_power.sqrt();

    let stems: Vec<[Vec<f64>; 2]> = raw
        .into_iter()
        .enumerate()
        .map(|(k, [a, b])| {
            let g = scales[k] * global;
            [
                a.iter().map(|v| g * v).collect(),
                b.iter().map(|v| g * v).collect(),
            ]
        })
        .collect();
    let mut y0 = vec![0.0; len];
    let mut y1 = vec![0.0; len];
    for stem in &stems {
        for (acc, v) in y0.iter_mut().zip(&stem[0]) {
            *acc += v;
        }
        for (acc, v) in y1.iter_mut().zip(&stem[1]) {
            *acc += v;
        }
    }

    let mut t = vec![0.0; len];
    for (k, src) in [&signals.s1, &signals.s2].into_iter().enumerate() {
        if !present[k] {
            continue;
        }
        let g = scales[k] * global;
        let direct = convolve(src, rirs.anechoic(k, 0));
        for (acc, v) in t.iter_mut().zip(&direct) {
            *acc += g * v;
        }
    }

    Ok(MixtureScene {
        y0,
        y1,
        t,
        stems,
        room: room.clone(),
        gains: *gains,
        component_scales: scales,
        global_scale: global,
        present,
    })
}
