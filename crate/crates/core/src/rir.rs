//! Image-source room impulse responses for shoebox rooms.
//!
//! Each image contributes `beta^reflections / distance` through the
//! fractional delay kernel in [`crate::fracdelay`]. The strongest image is
//! remembered so that [`anechoic`] can re-render it with its sub-sample delay.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fracdelay::{self, HALF_TAPS};
use crate::geometry::{RoomSpec, SourcePlacement, SourceRole, Vec3, SPEED_OF_SOUND};
use crate::wav;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RirParams {
    pub sample_rate: u32,
    pub speed_of_sound: f64,
    /// Hard cap on the response length in seconds.
    pub max_length_s: f64,
    /// Maximum number of reflections per axis.
    pub max_order: usize,
    /// Decay below the direct path, in dB, after which the tail is cut.
    pub tail_db: f64,
    /// Cutoff of the DC-blocking high-pass applied to reverberant responses.
    pub highpass_hz: Option<f64>,
}

impl Default for RirParams {
    fn default() -> Self {
        RirParams {
            sample_rate: 16_000,
            speed_of_sound: SPEED_OF_SOUND,
            max_length_s: 1.0,
            max_order: 40,
            tail_db: 60.0,
            highpass_hz: Some(100.0),
        }
    }
}

impl RirParams {
    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 || !(self.max_length_s > 0.0) {
            return Err(Error::config("rir parameters imply a zero-length response"));
        }
        if !(self.speed_of_sound > 0.0) || !(self.tail_db > 0.0) {
            return Err(Error::config(
                "speed of sound and tail threshold must be positive",
            ));
        }
        Ok(())
    }

    fn fs(&self) -> f64 {
        self.sample_rate as f64
    }
}

/// The image with the largest amplitude, kept so it can be re-rendered alone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrongestPath {
    /// Delay in samples.
    pub delay: f64,
    pub amplitude: f64,
    /// Divisor applied by peak normalisation; 1 before normalisation.
    pub normalizer: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rir {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    pub source_index: usize,
    pub receiver_index: usize,
    pub strongest_path: Option<StrongestPath>,
}

impl Rir {
    pub fn from_samples(samples: Vec<f64>, sample_rate: u32) -> Self {
        Rir {
            samples,
            sample_rate,
            source_index: 0,
            receiver_index: 0,
            strongest_path: None,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|x| x * x).sum()
    }

    /// Delay of the strongest path in samples, if known.
    pub fn direct_delay(&self) -> Option<f64> {
        self.strongest_path.map(|p| p.delay)
    }

    fn normalize_by(&mut self, divisor: f64) {
        for x in &mut self.samples {
            *x /= divisor;
        }
        if let Some(p) = &mut self.strongest_path {
            p.normalizer *= divisor;
        }
    }
}

/// Per-axis image terms: (offset of image coordinate from receiver, reflections).
fn axis_images(len: f64, src: f64, rcv: f64, max_dist: f64, max_order: usize) -> Vec<(f64, usize)> {
    let n_max = (max_dist / (2.0 * len)).ceil() as i64 + 1;
    let mut out = Vec::new();
    for n in -n_max..=n_max {
        for q in 0..2i64 {
            let refl = ((n - q).abs() + n.abs()) as usize;
            if refl > max_order {
                continue;
            }
            let img = (1 - 2 * q) as f64 * src + 2.0 * n as f64 * len;
            let delta = img - rcv;
            if delta.abs() <= max_dist {
                out.push((delta, refl));
            }
        }
    }
    out
}

/// Number of samples used for every response of `room`.
pub fn rir_length(
    room: &RoomSpec,
    extra_source: Option<Vec3>,
    params: &RirParams,
) -> Result<usize> {
    params.validate()?;
    let cap = (params.max_length_s * params.fs()).floor() as usize;
    let mut max_direct: f64 = 0.0;
    let sources = room.sources.iter().map(|s| s.position).chain(extra_source);
    for s in sources {
        for m in room.mic_pair.positions() {
            max_direct = max_direct.max(s.distance(m));
        }
    }
    let tail = if room.wall_reflection > 0.0 {
        room.rt60 * params.tail_db / 60.0
    } else {
        0.0
    };
    let wanted =
        ((max_direct / params.speed_of_sound + tail) * params.fs()).ceil() as usize + HALF_TAPS + 1;
    let direct_needed = (max_direct / params.speed_of_sound * params.fs()).ceil() as usize + 1;
    if direct_needed > cap {
        return Err(Error::config(format!(
            "direct path ({direct_needed} samples) exceeds the maximum response length ({cap})"
        )));
    }
    Ok(wanted.min(cap))
}

/// Simulates the response from `source` to `receiver` inside `room`.
pub fn simulate_rir(
    room: &RoomSpec,
    source: &SourcePlacement,
    receiver: Vec3,
    params: &RirParams,
) -> Result<Rir> {
    let len = rir_length(room, Some(source.position), params)?;
    simulate_with_length(room, source.position, receiver, params, len)
}

pub(crate) fn simulate_with_length(
    room: &RoomSpec,
    source: Vec3,
    receiver: Vec3,
    params: &RirParams,
    len: usize,
) -> Result<Rir> {
    params.validate()?;
    if len == 0 {
        return Err(Error::config("zero-length response requested"));
    }
    if !room.contains(source, 0.0) || !room.contains(receiver, 0.0) {
        return Err(Error::contract(
            "source and receiver must lie inside the room",
        ));
    }
    let c = params.speed_of_sound;
    let fs = params.fs();
    let beta = room.wall_reflection;
    let mut samples = vec![0.0; len];
    let mut strongest: Option<StrongestPath> = None;

    let mut render = |dist: f64, amplitude: f64, samples: &mut Vec<f64>| {
        let delay = dist / c * fs;
        fracdelay::add_delayed_impulse(samples, delay, amplitude);
        if strongest.is_none_or(|p| amplitude > p.amplitude) {
            strongest = Some(StrongestPath {
                delay,
                amplitude,
                normalizer: 1.0,
            });
        }
    };

    let direct = source.distance(receiver);
    if direct == 0.0 {
        return Err(Error::degenerate("source coincides with receiver"));
    }
    if beta == 0.0 {
        render(direct, 1.0 / direct, &mut samples);
    } else {
        let max_dist = (len + HALF_TAPS) as f64 / fs * c;
        let d = room.dimensions;
        let xs = axis_images(d.x, source.x, receiver.x, max_dist, params.max_order);
        let ys = axis_images(d.y, source.y, receiver.y, max_dist, params.max_order);
        let zs = axis_images(d.z, source.z, receiver.z, max_dist, params.max_order);
        let powers: Vec<f64> = (0..=3 * params.max_order)
            .map(|k| beta.powi(k as i32))
            .collect();
        let max_sq = max_dist * max_dist;
        for &(dx, rx) in &xs {
            let dx2 = dx * dx;
            if dx2 > max_sq {
                continue;
            }
            for &(dy, ry) in &ys {
                let dxy2 = dx2 + dy * dy;
                if dxy2 > max_sq {
                    continue;
                }
                for &(dz, rz) in &zs {
                    let dist2 = dxy2 + dz * dz;
                    if dist2 > max_sq {
                        continue;
                    }
                    let gain = powers[rx + ry + rz];
                    if gain == 0.0 {
                        continue;
                    }
                    let dist = dist2.sqrt();
                    render(dist, gain / dist, &mut samples);
                }
            }
        }
        if let Some(fc) = params.highpass_hz {
            highpass(&mut samples, fc, fs);
        }
    }

    Ok(Rir {
        samples,
        sample_rate: params.sample_rate,
        source_index: 0,
        receiver_index: 0,
        strongest_path: strongest,
    })
}

/// Second-order DC-blocking high-pass (Allen & Berkley). Every image arrives
/// with positive amplitude, so without it a late-growing DC component
/// stretches the reverberation tail.
pub fn highpass(samples: &mut [f64], cutoff_hz: f64, sample_rate: f64) {
    let w = 2.0 * std::f64::consts::PI * cutoff_hz / sample_rate;
    let r1 = (-w).exp();
    let b1 = 2.0 * r1 * w.cos();
    let b2 = -r1 * r1;
    let a1 = -(1.0 + r1);
    let (mut y1, mut y2) = (0.0, 0.0);
    for x in samples.iter_mut() {
        let y0 = b1 * y1 + b2 * y2 + *x;
        *x = y0 + a1 * y1 + r1 * y2;
        y2 = y1;
        y1 = y0;
    }
}

/// Keeps only the strongest path of `rir`, with the same length and rate.
///
/// Simulated responses re-render the strongest image's whole kernel so the
/// sub-sample delay survives. Responses built from raw samples have no path
/// record; their largest-magnitude sample is kept.
pub fn anechoic(rir: &Rir) -> Result<Rir> {
    if rir.samples.iter().all(|&x| x == 0.0) {
        return Err(Error::degenerate(
            "anechoic reduction of an all-zero response",
        ));
    }
    let mut samples = vec![0.0; rir.len()];
    match rir.strongest_path {
        Some(p) => {
            let (first, taps) = fracdelay::kernel(p.delay);
            for (i, tap) in taps.iter().enumerate() {
                let n = first + i as i64;
                if n >= 0 && (n as usize) < samples.len() {
                    samples[n as usize] = (p.amplitude * tap) / p.normalizer;
                }
            }
        }
        None => {
            let (idx, _) = rir
                .samples
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |best, (i, &x)| {
                    if x.abs() > best.1 {
                        (i, x.abs())
                    } else {
                        best
                    }
                });
            samples[idx] = rir.samples[idx];
        }
    }
    Ok(Rir {
        samples,
        ..rir.clone()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RirManifestEntry {
    pub source_index: usize,
    pub receiver_index: usize,
    pub role: SourceRole,
    /// Factor applied to the raw response by peak normalisation.
    pub normalization: f64,
    /// Strongest-path delay in samples.
    pub direct_delay_samples: f64,
    pub file: String,
    pub anechoic_file: String,
}

/// The 4×2 responses of one scene (sources × receivers) and their anechoic
/// reductions, peak-normalised per source over both receivers.
#[derive(Debug, Clone, PartialEq)]
pub struct RirMatrix {
    pub entries: Vec<[Rir; 2]>,
    pub anechoic_entries: Vec<[Rir; 2]>,
    /// Per-source normalisation factors (1 / raw peak).
    pub normalization: Vec<f64>,
}

impl RirMatrix {
    pub fn get(&self, source: usize, receiver: usize) -> &Rir {
        &self.entries[source][receiver]
    }

    pub fn anechoic(&self, source: usize, receiver: usize) -> &Rir {
        &self.anechoic_entries[source][receiver]
    }

    /// Writes one float WAV per response and returns the manifest entries.
    pub fn export(&self, room: &RoomSpec, dir: &Path) -> Result<Vec<RirManifestEntry>> {
        let mut manifest = Vec::new();
        for (k, pair) in self.entries.iter().enumerate() {
            for (j, rir) in pair.iter().enumerate() {
                let file = format!("rir_s{k}_m{j}.wav");
                let anechoic_file = format!("rir_s{k}_m{j}_anechoic.wav");
                wav::write_mono_f32(&dir.join(&file), &rir.samples, rir.sample_rate)?;
                wav::write_mono_f32(
                    &dir.join(&anechoic_file),
                    &self.anechoic_entries[k][j].samples,
                    rir.sample_rate,
                )?;
                manifest.push(RirManifestEntry {
                    source_index: k,
                    receiver_index: j,
                    role: room.sources[k].role,
                    normalization: self.normalization[k],
                    direct_delay_samples: rir.direct_delay().unwrap_or(f64::NAN),
                    file,
                    anechoic_file,
                });
            }
        }
        Ok(manifest)
    }
}

/// Simulates every (source, receiver) response of `room` and normalises them.
pub fn make_rir_matrix(room: &RoomSpec, params: &RirParams) -> Result<RirMatrix> {
    if room.sources.is_empty() {
        return Err(Error::contract("room has no sources"));
    }
    let len = rir_length(room, None, params)?;
    let mics = room.mic_pair.positions();
    let jobs: Vec<(usize, usize)> = (0..room.sources.len())
        .flat_map(|k| (0..2).map(move |j| (k, j)))
        .collect();
    let raw: Vec<Rir> = jobs
        .par_iter()
        .map(|&(k, j)| {
            let mut rir =
                simulate_with_length(room, room.sources[k].position, mics[j], params, len)?;
            rir.source_index = k;
            rir.receiver_index = j;
            Ok(rir)
        })
        .collect::<Result<_>>()?;

    let mut entries = Vec::with_capacity(room.sources.len());
    let mut anechoic_entries = Vec::with_capacity(room.sources.len());
    let mut normalization = Vec::with_capacity(room.sources.len());
    for pair in raw.chunks(2) {
        let peak = pair[0].peak().max(pair[1].peak());
        if !(peak > 0.0) {
            return Err(Error::degenerate("simulated response is silent"));
        }
        let mut a = pair[0].clone();
        let mut b = pair[1].clone();
        a.normalize_by(peak);
        b.normalize_by(peak);
        anechoic_entries.push([anechoic(&a)?, anechoic(&b)?]);
        entries.push([a, b]);
        normalization.push(1.0 / peak);
    }
    Ok(RirMatrix {
        entries,
        anechoic_entries,
        normalization,
    })
}

/// Reverberation time from Schroeder backward integration, extrapolated from
/// the -5 dB to -25 dB decay range.
pub fn schroeder_rt60(samples: &[f64], sample_rate: u32) -> Option<f64> {
    let mut edc = vec![0.0; samples.len()];
    let mut acc = 0.0;
    for i in (0..samples.len()).rev() {
        acc += samples[i] * samples[i];
        edc[i] = acc;
    }
    let total = edc.first().copied()?;
    if !(total > 0.0) {
        return None;
    }
    let db: Vec<f64> = edc.iter().map(|e| 10.0 * (e / total).log10()).collect();
    let start = db.iter().position(|&v| v <= -5.0)?;
    let end = db.iter().position(|&v| v <= -25.0)?;
    if end <= start + 1 {
        return None;
    }
    let fs = sample_rate as f64;
    let n = (end - start) as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (i, &y) in db.iter().enumerate().take(end).skip(start) {
        let x = i as f64 / fs;
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    (slope < 0.0).then(|| -60.0 / slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{sample_scene, MicPair, SamplerConfig};

    fn mics() -> MicPair {
        MicPair::new(Vec3::new(3.0, 2.5, 1.5), Vec3::new(1.0, 0.0, 0.0), 0.1).unwrap()
    }

    fn placement(m: &MicPair, angle: f64, range: f64) -> SourcePlacement {
        SourcePlacement::new(m.point_at(angle, 0.0, range), SourceRole::Target1, m).unwrap()
    }

    fn free_room(dims: Vec3, m: MicPair, s: Vec<SourcePlacement>) -> RoomSpec {
        RoomSpec::free_field(dims, m, s)
    }

    #[test]
    fn free_field_has_single_peak_at_distance_over_c() {
        let m = mics();
        let src = placement(&m, 20.0, 1.3);
        let room = free_room(Vec3::new(6.0, 5.0, 3.0), m, vec![src]);
        let params = RirParams::default();
        let rir = simulate_rir(&room, &src, m.position_a, &params).unwrap();
        let dist = src.position.distance(m.position_a);
        let delay = dist / SPEED_OF_SOUND * 16_000.0;
        let p = rir.strongest_path.unwrap();
        assert!((p.delay - delay).abs() < 1e-12);
        assert!((p.amplitude - 1.0 / dist).abs() < 1e-12);
        let peak_idx = rir
            .samples
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap()
            .0;
        assert_eq!(peak_idx, delay.round() as usize);
        // Nothing outside the kernel support.
        for (i, x) in rir.samples.iter().enumerate() {
            if (i as f64 - delay).abs() > HALF_TAPS as f64 + 1.0 {
                assert_eq!(*x, 0.0);
            }
        }
    }

    #[test]
    fn inverse_distance_law() {
        // Integer sample delays make the peak sample equal to the amplitude.
        let m = MicPair::new(Vec3::new(1.0, 1.0, 1.0), Vec3::new(1.0, 0.0, 0.0), 0.1).unwrap();
        let c_per_sample = SPEED_OF_SOUND / 16_000.0;
        let near = m.position_a + Vec3::new(0.0, 40.0 * c_per_sample, 0.0);
        let far = m.position_a + Vec3::new(0.0, 80.0 * c_per_sample, 0.0);
        let room1 = free_room(Vec3::new(4.0, 4.0, 2.0), m, vec![]);
        let room2 = free_room(Vec3::new(8.0, 8.0, 4.0), m, vec![]);
        let p = RirParams::default();
        let s1 = SourcePlacement::new(near, SourceRole::Target1, &m).unwrap();
        let s2 = SourcePlacement::new(far, SourceRole::Target1, &m).unwrap();
        let a = simulate_rir(&room1, &s1, m.position_a, &p).unwrap().peak();
        let b = simulate_rir(&room2, &s2, m.position_a, &p).unwrap().peak();
        assert!((a / b - 2.0).abs() < 1e-9, "{a} {b}");
    }

    #[test]
    fn zero_length_params_rejected() {
        let m = mics();
        let src = placement(&m, 0.0, 1.0);
        let room = free_room(Vec3::new(6.0, 5.0, 3.0), m, vec![src]);
        let p = RirParams {
            max_length_s: 0.0,
            ..RirParams::default()
        };
        assert!(matches!(
            simulate_rir(&room, &src, m.position_a, &p),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn anechoic_of_single_impulse_is_identity() {
        let mut x = vec![0.0; 64];
        x[10] = 0.7;
        let r = Rir::from_samples(x.clone(), 16_000);
        assert_eq!(anechoic(&r).unwrap().samples, x);
    }

    #[test]
    fn anechoic_drops_weaker_echo() {
        let mut x = vec![0.0; 400];
        x[100] = 1.0;
        x[200] = 0.5;
        let out = anechoic(&Rir::from_samples(x, 16_000)).unwrap();
        assert_eq!(out.samples[100], 1.0);
        assert_eq!(out.samples.iter().filter(|&&v| v != 0.0).count(), 1);
    }

    #[test]
    fn anechoic_rejects_silence() {
        assert!(anechoic(&Rir::from_samples(vec![0.0; 8], 16_000)).is_err());
    }

    #[test]
    fn reverberant_strongest_path_is_direct_path() {
        let room = sample_scene(&SamplerConfig::default(), 5).unwrap();
        let m = room.mic_pair;
        let params = RirParams::default();
        let src = room.sources[0];
        let rir = simulate_rir(&room, &src, m.position_b, &params).unwrap();
        let expected = src.position.distance(m.position_b) / SPEED_OF_SOUND * 16_000.0;
        assert!((rir.direct_delay().unwrap() - expected).abs() < 0.5);
        let an = anechoic(&rir).unwrap();
        assert!(an.energy() <= rir.energy());
    }

    #[test]
    fn matrix_normalisation_and_free_field_identity() {
        let m = mics();
        let sources: Vec<_> = [0.0, 15.0, 70.0, -40.0]
            .iter()
            .zip(SourceRole::ALL)
            .map(|(&a, role)| SourcePlacement::new(m.point_at(a, 0.5, 1.2), role, &m).unwrap())
            .collect();
        let room = free_room(Vec3::new(6.0, 5.0, 3.0), m, sources);
        let mat = make_rir_matrix(&room, &RirParams::default()).unwrap();
        for k in 0..4 {
            let peak = mat.get(k, 0).peak().max(mat.get(k, 1).peak());
            assert_eq!(peak, 1.0);
            for j in 0..2 {
                assert_eq!(mat.get(k, j).samples, mat.anechoic(k, j).samples);
            }
        }
    }

    #[test]
    fn reflection_increases_energy() {
        let m = mics();
        let src = placement(&m, 10.0, 1.5);
        let base = free_room(Vec3::new(6.0, 5.0, 3.0), m, vec![src]);
        let p = RirParams {
            max_length_s: 0.25,
            ..RirParams::default()
        };
        let mut last = 0.0;
        for beta in [0.0, 0.3, 0.6, 0.8] {
            let room = RoomSpec {
                wall_reflection: beta,
                rt60: 0.25,
                ..base.clone()
            };
            let e = simulate_rir(&room, &src, m.position_a, &p)
                .unwrap()
                .energy();
            assert!(e >= last, "beta {beta}: {e} < {last}");
            last = e;
        }
    }

    #[test]
    fn reciprocity_of_direct_delay() {
        let room = sample_scene(&SamplerConfig::default(), 11).unwrap();
        let src = room.sources[2];
        let recv = room.mic_pair.position_a;
        let p = RirParams::default();
        let forward = simulate_rir(&room, &src, recv, &p).unwrap();
        let swapped_src = SourcePlacement {
            position: recv,
            ..src
        };
        let backward = simulate_rir(&room, &swapped_src, src.position, &p).unwrap();
        assert_eq!(forward.direct_delay(), backward.direct_delay());
    }

    #[test]
    fn rt60_matches_request() {
        // Sabine presumes a diffuse field; these rooms keep horizontal aspect <= 1.5.
        for dims in [
            Vec3::new(3.4, 3.0, 2.5),
            Vec3::new(6.0, 5.0, 3.0),
            Vec3::new(8.0, 7.0, 3.5),
        ] {
            let mid = Vec3::new(dims.x * 0.45, dims.y * 0.43, 1.2);
            let m = MicPair::new(mid, Vec3::new(1.0, 0.0, 0.0), 0.1).unwrap();
            let src = SourcePlacement::new(mid + Vec3::new(0.7, 0.8, 0.3), SourceRole::Target1, &m)
                .unwrap();
            for rt60 in [0.2, 0.3, 0.4, 0.5, 0.6] {
                let room = RoomSpec::with_rt60(dims, rt60, m, vec![src]).unwrap();
                let rir = simulate_rir(&room, &src, m.position_a, &RirParams::default()).unwrap();
                let measured = schroeder_rt60(&rir.samples, 16_000).unwrap();
                assert!(
                    (measured - rt60).abs() <= 0.3 * rt60,
                    "{dims:?}: requested {rt60}, measured {measured}"
                );
            }
        }
    }
}
