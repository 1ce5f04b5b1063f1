//! End-to-end checks across modules: dataset files on disk, corpus ingest,
//! configuration-driven separation.

use std::path::Path;

use spatialsep::config::GlobalConfig;
use spatialsep::dataset::{evaluate_manifest, synth_dataset, Manifest};
use spatialsep::dsp::estimate_delay;
use spatialsep::geometry::SourceRole;
use spatialsep::metrics::ReportKind;
use spatialsep::separator::{
    separate_streaming, steer, IdentitySeparator, IpdSeparator, Separator,
};
use spatialsep::signals::{generate, seeded, SignalKind};
use spatialsep::wav;

fn quick_config() -> GlobalConfig {
    let mut c =
        GlobalConfig::from_toml("seed = 5\n[synth]\nduration_s = 0.5\n[rir]\nmax_length_s = 0.3\n")
            .unwrap();
    c.synth.write_stems = true;
    c.synth.write_rirs = true;
    c
}

#[test]
fn written_scenes_decompose_into_their_stems() {
    let dir = tempfile::tempdir().unwrap();
    let config = quick_config();
    let manifest_path = synth_dataset(&config, 4, dir.path(), 2).unwrap();
    let manifest = Manifest::load(&manifest_path).unwrap();
    assert_eq!(manifest.header.count, 4);
    assert_eq!(manifest.scenes.len(), 4);
    for scene in &manifest.scenes {
        let mix = wav::read(&dir.path().join(&scene.files.mixture)).unwrap();
        assert_eq!(mix.num_frames(), 8_000);
        assert_eq!(scene.files.stems.len(), 4);
        let stems: Vec<wav::Audio> = scene
            .files
            .stems
            .iter()
            .map(|f| wav::read(&dir.path().join(f)).unwrap())
            .collect();
        for j in 0..2 {
            let peak = mix.channels[j].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for n in 0..mix.num_frames() {
                let sum: f64 = stems.iter().map(|s| s.channels[j][n]).sum();
                // Each file is rounded to single precision independently.
                assert!((mix.channels[j][n] - sum).abs() <= 1e-6 * peak.max(1e-3));
            }
        }
        // Absent components are written as silent stems.
        for (k, present) in scene.present.iter().enumerate() {
            let silent = stems[k].channels[0].iter().all(|&v| v == 0.0);
            assert_eq!(silent, !present, "scene {} component {k}", scene.index);
        }
    }
}

#[test]
fn manifest_tdoas_match_the_written_anechoic_responses() {
    let dir = tempfile::tempdir().unwrap();
    let manifest =
        Manifest::load(&synth_dataset(&quick_config(), 3, dir.path(), 1).unwrap()).unwrap();
    for scene in &manifest.scenes {
        assert_eq!(scene.files.rirs.len(), 8);
        for (k, t) in scene.tdoa.iter().enumerate() {
            let file = |j: usize| {
                let e = scene
                    .files
                    .rirs
                    .iter()
                    .find(|e| e.source_index == k && e.receiver_index == j)
                    .unwrap();
                wav::read(&dir.path().join(&e.anechoic_file))
                    .unwrap()
                    .channels
                    .remove(0)
            };
            let lag = estimate_delay(&file(0), &file(1), 8).unwrap();
            // Single-precision storage of the kernels limits the agreement.
            assert!(
                (lag - t.samples).abs() < 0.05,
                "scene {} source {k}: {lag} vs {}",
                scene.index,
                t.samples
            );
        }
        let target = scene.angle(SourceRole::Target1).unwrap();
        assert!(target.abs() <= 30.0);
    }
}

#[test]
fn identity_scores_the_raw_mixture() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth_dataset(&quick_config(), 2, dir.path(), 1).unwrap();
    let report = evaluate_manifest(&IdentitySeparator, &manifest, 512).unwrap();
    assert_eq!(report.kind, ReportKind::Dataset);
    assert_eq!(report.rows.len(), 2);
    let gain: f64 = report.metadata["mean_improvement_db"].parse().unwrap();
    assert_eq!(gain, 0.0);
}

#[test]
fn corpus_recordings_are_resampled_on_ingest() {
    let dir = tempfile::tempdir().unwrap();
    let speech = dir.path().join("speech");
    std::fs::create_dir(&speech).unwrap();
    for (k, rate) in [(0u64, 48_000u32), (1, 22_050)] {
        let x = generate(
            SignalKind::SpeechLike,
            rate as usize,
            rate,
            &mut seeded(k, 0),
        );
        let stereo = [x.clone(), x.iter().map(|v| 0.5 * v).collect::<Vec<_>>()];
        wav::write_f32(
            &speech.join(format!("clip{k}.wav")),
            &[&stereo[0], &stereo[1]],
            rate,
        )
        .unwrap();
    }
    let mut config = quick_config();
    config.synth.speech_dir = Some(speech.clone());
    let out = dir.path().join("data");
    let manifest = Manifest::load(&synth_dataset(&config, 2, &out, 1).unwrap()).unwrap();
    for scene in &manifest.scenes {
        let t = wav::read(&out.join(&scene.files.target)).unwrap();
        assert_eq!((t.sample_rate, t.num_frames()), (16_000, 8_000));
        assert!(t.channels[0].iter().any(|&v| v != 0.0));
    }

    config.synth.speech_dir = Some(dir.path().join("missing"));
    assert!(synth_dataset(&config, 1, &out, 1).is_err());
}

fn write_config(dir: &Path, text: &str) -> GlobalConfig {
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    GlobalConfig::load(&path).unwrap()
}

#[test]
fn configured_offset_matches_explicit_steering() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "[separator]\nsteering_offset_samples = -2.5\nmask_floor = 0.1\n",
    );
    let from_file = IpdSeparator::new(config.separator.to_config(16_000).unwrap()).unwrap();
    let base = IpdSeparator::new(
        config
            .separator
            .to_config(16_000)
            .map(|c| steer(&c, 0.0).unwrap())
            .unwrap(),
    )
    .unwrap();
    let explicit = base.steered(-2.5).unwrap();

    let x = generate(SignalKind::Pink, 6_000, 16_000, &mut seeded(9, 0));
    let y = generate(SignalKind::Pink, 6_000, 16_000, &mut seeded(9, 1));
    let a = separate_streaming(&from_file, &x, &y, 100).unwrap();
    let b = explicit.separate(&x, &y).unwrap();
    assert_eq!(a, b);
}
