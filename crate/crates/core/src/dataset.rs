//! Dataset generation: sampled scenes rendered to WAV files plus a JSON-lines
//! manifest.
//!
//! Scene `k` draws everything from its own seed, derived from the global seed
//! and `k` alone, so the output does not depend on the worker count or on the
//! order in which scenes finish.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::GlobalConfig;
use crate::error::{Error, Result};
use crate::geometry::{sample_scene_with, tdoa, RoomSpec, SamplerConfig, SourceRole};
use crate::metrics::{bss_sdr_detailed, EvalReport, ReportKind, ReportRow};
use crate::rir::{make_rir_matrix, RirManifestEntry, RirParams};
use crate::separator::Separator;
use crate::signals::{generate, seeded, SignalKind};
use crate::synth::{
    fit_length, sample_gains_with, synthesize, GainConfig, GainSpec, MixtureScene, SceneSignals,
};
use crate::wav;

pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub gains: GainConfig,
    /// Probability that the second target is empty.
    pub p1: f64,
    /// Probability that the interference is empty.
    pub p2: f64,
    pub duration_s: f64,
    pub target_signal: SignalKind,
    pub interference_signal: SignalKind,
    pub noise_signal: SignalKind,
    /// Write the per-component reverberant stems.
    pub write_stems: bool,
    /// Write the 4×2 responses and their anechoic reductions.
    pub write_rirs: bool,
    /// Directory of mono WAVs used for the targets instead of synthetic signals.
    pub speech_dir: Option<PathBuf>,
    /// Directory of mono WAVs used for interference and noise.
    pub noise_dir: Option<PathBuf>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            gains: GainConfig::default(),
            p1: 0.8,
            p2: 0.6,
            duration_s: 3.0,
            target_signal: SignalKind::SpeechLike,
            interference_signal: SignalKind::NoiseBurst,
            noise_signal: SignalKind::Pink,
            write_stems: false,
            write_rirs: false,
            speech_dir: None,
            noise_dir: None,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p1", self.p1), ("p2", self.p2)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if !(self.duration_s > 0.0) {
            return Err(Error::config("scene duration must be positive"));
        }
        Ok(())
    }
}

/// Mono recordings resampled to the working rate.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub clips: Vec<Vec<f64>>,
}

impl Corpus {
    /// Loads every `.wav` file in `dir` (sorted by name), mixing down to mono.
    pub fn load(dir: &Path, sample_rate: u32) -> Result<Self> {
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
            .collect();
        paths.sort();
        if paths.is_empty() {
            return Err(Error::config(format!("no WAV files in {}", dir.display())));
        }
        let clips = paths
            .iter()
            .map(|p| {
                let audio = wav::read(p)?;
                Ok(wav::resample(&audio.mono(), audio.sample_rate, sample_rate))
            })
            .collect::<Result<_>>()?;
        Ok(Corpus { clips })
    }

    /// A random excerpt of `len` samples, zero-padded when the clip is short.
    pub fn draw(&self, len: usize, rng: &mut impl Rng) -> Vec<f64> {
        let clip = &self.clips[rng.random_range(0..self.clips.len())];
        let start = if clip.len() > len {
            rng.random_range(0..=clip.len() - len)
        } else {
            0
        };
        fit_length(clip[start..].to_vec(), len)
    }
}

/// Where the source waveforms of a scene come from.
#[derive(Debug, Clone, Default)]
pub struct SignalSources {
    pub speech: Option<Corpus>,
    pub noise: Option<Corpus>,
}

impl SignalSources {
    pub fn load(config: &SynthConfig, sample_rate: u32) -> Result<Self> {
        let load = |dir: &Option<PathBuf>| {
            dir.as_deref()
                .map(|d| Corpus::load(d, sample_rate))
                .transpose()
        };
        Ok(SignalSources {
            speech: load(&config.speech_dir)?,
            noise: load(&config.noise_dir)?,
        })
    }
}

/// Seed of scene `index`, derived from the global seed alone.
pub fn scene_seed(global_seed: u64, index: usize) -> u64 {
    seeded(global_seed, index as u64).next_u64()
}

/// Everything drawn at random for one scene.
#[derive(Debug, Clone)]
pub struct ScenePlan {
    pub seed: u64,
    pub room: RoomSpec,
    pub gains: GainSpec,
    pub signals: SceneSignals,
}

pub fn plan_scene(
    sampler: &SamplerConfig,
    synth: &SynthConfig,
    sources: &SignalSources,
    sample_rate: u32,
    seed: u64,
) -> Result<ScenePlan> {
    sampler.validate()?;
    synth.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let room = sample_scene_with(sampler, &mut rng)?;
    let gains = sample_gains_with(&synth.gains, &mut rng)?;
    let s2_present = !rng.random_bool(synth.p1);
    let i_present = !rng.random_bool(synth.p2);
    let len = (synth.duration_s * sample_rate as f64).round() as usize;
    let draw = |corpus: &Option<Corpus>, kind: SignalKind, rng: &mut ChaCha8Rng| match corpus {
        Some(c) => c.draw(len, rng),
        None => generate(kind, len, sample_rate, rng),
    };
    let s1 = draw(&sources.speech, synth.target_signal, &mut rng);
    let s2 = if s2_present {
        draw(&sources.speech, synth.target_signal, &mut rng)
    } else {
        Vec::new()
    };
    let i = if i_present {
        draw(&sources.noise, synth.interference_signal, &mut rng)
    } else {
        Vec::new()
    };
    let n = draw(&sources.noise, synth.noise_signal, &mut rng);
    Ok(ScenePlan {
        seed,
        room,
        gains,
        signals: SceneSignals { s1, s2, i, n },
    })
}

/// Simulates the responses of a planned scene and synthesises the mixture.
pub fn render_scene(
    plan: &ScenePlan,
    rir: &RirParams,
) -> Result<(MixtureScene, crate::rir::RirMatrix)> {
    let rirs = make_rir_matrix(&plan.room, rir)?;
    let scene = synthesize(&plan.room, &rirs, &plan.signals, &plan.gains)?;
    Ok((scene, rirs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub seed: u64,
    pub count: usize,
    pub theta: f64,
    pub phi: f64,
    pub p1: f64,
    pub p2: f64,
    pub sample_rate: u32,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceTdoa {
    pub role: SourceRole,
    pub seconds: f64,
    pub samples: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFiles {
    /// Two-channel mixture.
    pub mixture: String,
    /// Anechoic ground truth at microphone 0.
    pub target: String,
    /// Two-channel stems in source order, when written.
    pub stems: Vec<String>,
    pub room: String,
    pub rirs: Vec<RirManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRecord {
    pub index: usize,
    pub seed: u64,
    pub gains: GainSpec,
    /// Presence of s1, s2, interference and noise.
    pub present: [bool; 4],
    pub room: RoomSpec,
    pub tdoa: Vec<SourceTdoa>,
    /// Paths relative to the manifest directory.
    pub files: SceneFiles,
}

impl SceneRecord {
    /// Angle to the 0° plane of the source with `role`.
    pub fn angle(&self, role: SourceRole) -> Option<f64> {
        self.room.source(role).map(|s| s.angle_to_zero_plane)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub header: ManifestHeader,
    pub scenes: Vec<SceneRecord>,
}

impl Manifest {
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serialises");
        out.push('\n');
        for s in &self.scenes {
            out.push_str(&serde_json::to_string(s).expect("scene serialises"));
            out.push('\n');
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let bad = |message: String| Error::Format {
            path: path.into(),
            message,
        };
        let first = lines
            .next()
            .ok_or_else(|| bad("empty manifest".into()))?
            .map_err(|e| Error::io(path, e))?;
        let header: ManifestHeader =
            serde_json::from_str(&first).map_err(|e| bad(format!("header: {e}")))?;
        let mut scenes = Vec::new();
        for (n, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            scenes.push(
                serde_json::from_str(&line).map_err(|e| bad(format!("line {}: {e}", n + 2)))?,
            );
        }
        Ok(Manifest { header, scenes })
    }
}

fn write_scene(
    index: usize,
    seed: u64,
    config: &GlobalConfig,
    sources: &SignalSources,
    out_dir: &Path,
) -> Result<SceneRecord> {
    let fs_rate = config.rir.sample_rate;
    let plan = plan_scene(&config.geometry, &config.synth, sources, fs_rate, seed)?;
    let (scene, rirs) = render_scene(&plan, &config.rir)?;
    let name = format!("scene_{index:05}");
    let dir = out_dir.join(&name);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let rel = |f: &str| format!("{name}/{f}");

    wav::write_f32(&dir.join("mixture.wav"), &[&scene.y0, &scene.y1], fs_rate)?;
    wav::write_mono_f32(&dir.join("target.wav"), &scene.t, fs_rate)?;
    plan.room.save(&dir.join("room.json"))?;
    let mut stems = Vec::new();
    if config.synth.write_stems {
        for (role, [a, b]) in SourceRole::ALL.iter().zip(&scene.stems) {
            let file = format!("stem_{}.wav", role.as_str());
            wav::write_f32(&dir.join(&file), &[a, b], fs_rate)?;
            stems.push(rel(&file));
        }
    }
    let mut rir_entries = Vec::new();
    if config.synth.write_rirs {
        for mut e in rirs.export(&plan.room, &dir)? {
            e.file = rel(&e.file);
            e.anechoic_file = rel(&e.anechoic_file);
            rir_entries.push(e);
        }
    }
    let tdoas = plan
        .room
        .sources
        .iter()
        .map(|s| {
            let t = tdoa(s.position, &plan.room.mic_pair, config.rir.speed_of_sound)?;
            Ok(SourceTdoa {
                role: s.role,
                seconds: t,
                samples: t * fs_rate as f64,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SceneRecord {
        index,
        seed,
        gains: plan.gains,
        present: [
            true,
            !plan.signals.s2.is_empty(),
            !plan.signals.i.is_empty(),
            !plan.signals.n.is_empty(),
        ],
        room: plan.room,
        tdoa: tdoas,
        files: SceneFiles {
            mixture: rel("mixture.wav"),
            target: rel("target.wav"),
            stems,
            room: rel("room.json"),
            rirs: rir_entries,
        },
    })
}

/// Generates `count` scenes under `out_dir` and writes the manifest, whose
/// path is returned. `workers == 0` uses one worker per core.
pub fn synth_dataset(
    config: &GlobalConfig,
    count: usize,
    out_dir: &Path,
    workers: usize,
) -> Result<PathBuf> {
    config.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let sources = SignalSources::load(&config.synth, config.rir.sample_rate)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config(format!("cannot start {workers} workers: {e}")))?;
    let mut scenes: Vec<SceneRecord> = pool.install(|| {
        (0..count)
            .into_par_iter()
            .map(|k| write_scene(k, scene_seed(config.seed, k), config, &sources, out_dir))
            .collect::<Result<_>>()
    })?;
    scenes.sort_by_key(|s| s.index);
    let manifest = Manifest {
        header: ManifestHeader {
            seed: config.seed,
            count,
            theta: config.geometry.regions.theta,
            phi: config.geometry.regions.phi,
            p1: config.synth.p1,
            p2: config.synth.p2,
            sample_rate: config.rir.sample_rate,
            duration_s: config.synth.duration_s,
        },
        scenes,
    };
    let path = out_dir.join(MANIFEST_FILE);
    fs::write(&path, manifest.to_jsonl()).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// BSS-SDR of `separator` on every scene of a manifest, one row per scene at
/// the angle of its first target. The metadata carries the mean input SDR
/// (microphone 0 against the ground truth) and the mean improvement.
pub fn evaluate_manifest(
    separator: &dyn Separator,
    manifest_path: &Path,
    filter_taps: usize,
) -> Result<EvalReport> {
    let manifest = Manifest::load(manifest_path)?;
    let root = manifest_path.parent().unwrap_or(Path::new("."));
    let scored: Vec<(f64, f64, bool)> = manifest
        .scenes
        .par_iter()
        .map(|scene| {
            let mix = wav::read(&root.join(&scene.files.mixture))?;
            let target = wav::read(&root.join(&scene.files.target))?;
            if mix.channels.len() != 2 || target.channels.len() != 1 {
                return Err(Error::Format {
                    path: root.join(&scene.files.mixture),
                    message: "expected a two-channel mixture and a mono target".into(),
                });
            }
            let out = separator.separate(&mix.channels[0], &mix.channels[1])?;
            let after = bss_sdr_detailed(&out, &target.channels[0], filter_taps)?;
            let before = bss_sdr_detailed(&mix.channels[0], &target.channels[0], filter_taps)?;
            Ok((after.sdr_db, before.sdr_db, after.regularized))
        })
        .collect::<Result<_>>()?;
    let n = scored.len().max(1) as f64;
    let mean_in = scored.iter().map(|s| s.1).sum::<f64>() / n;
    let mean_gain = scored.iter().map(|s| s.0 - s.1).sum::<f64>() / n;
    let mut report = EvalReport::new(ReportKind::Dataset, separator.name())
        .with_meta("manifest", manifest_path.display())
        .with_meta("scenes", scored.len())
        .with_meta("mean_input_sdr_db", format!("{mean_in:.4}"))
        .with_meta("mean_improvement_db", format!("{mean_gain:.4}"));
    for (scene, (sdr, _, regularized)) in manifest.scenes.iter().zip(scored) {
        let angle = scene.angle(SourceRole::Target1).unwrap_or(0.0);
        let mut row = ReportRow::from_values(angle, format!("scene_{:05}", scene.index), vec![sdr]);
        row.regularized = regularized;
        report.rows.push(row);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scene_seeds_are_distinct_and_stable() {
        let a: Vec<u64> = (0..100).map(|k| scene_seed(7, k)).collect();
        let mut sorted = a.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 100);
        assert_eq!(a[3], scene_seed(7, 3));
        assert_ne!(scene_seed(7, 0), scene_seed(8, 0));
    }

    #[test]
    fn presence_follows_the_dropout_probabilities() {
        let synth = SynthConfig {
            duration_s: 0.01,
            ..Default::default()
        };
        let sampler = SamplerConfig::default();
        let sources = SignalSources::default();
        let n = 2000;
        let (mut s2_empty, mut i_empty) = (0, 0);
        for k in 0..n {
            let plan = plan_scene(&sampler, &synth, &sources, 16_000, scene_seed(1, k)).unwrap();
            s2_empty += plan.signals.s2.is_empty() as usize;
            i_empty += plan.signals.i.is_empty() as usize;
            assert_eq!(plan.signals.s1.len(), 160);
            assert_eq!(plan.signals.n.len(), 160);
        }
        // Binomial standard error at n = 2000 is about 0.011; allow 4 sigma.
        assert!((s2_empty as f64 / n as f64 - 0.8).abs() < 0.04);
        assert!((i_empty as f64 / n as f64 - 0.6).abs() < 0.045);
    }

    #[test]
    fn corpus_draws_crop_or_pad() {
        let corpus = Corpus {
            clips: vec![(0..10).map(f64::from).collect()],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let short = corpus.draw(4, &mut rng);
        assert_eq!(short.len(), 4);
        assert_eq!(short[1] - short[0], 1.0);
        let long = corpus.draw(12, &mut rng);
        assert_eq!(&long[..10], &corpus.clips[0][..]);
        assert_eq!(&long[10..], &[0.0, 0.0]);
    }

    #[test]
    fn invalid_probabilities_are_config_errors() {
        let synth = SynthConfig {
            p1: 1.5,
            ..Default::default()
        };
        assert!(matches!(synth.validate(), Err(Error::Config(_))));
    }
}
