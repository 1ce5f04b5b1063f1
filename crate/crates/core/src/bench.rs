//! Listening-room benches: the target loudspeaker at 0° and interference
//! loudspeakers every 45° around a fixed microphone pair.
//!
//! Every bench takes any [`Separator`] and returns an [`EvalReport`] whose
//! rows are in a fixed order, independent of thread scheduling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{
    bss_sdr_detailed, measured_suppression_db, Band, DirectivityPoint, EvalReport, PreparedSweep,
    ReportKind, ReportRow, SweepConfig,
};
use crate::separator::{McwfSeparator, Separator};
use crate::signals::{generate, seeded, SignalKind};
use crate::stage::{RoomMode, SpeakerResponses, Stage, StageConfig};
use crate::synth::{convolve, mean_power};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterferenceType {
    SpeechLike,
    NoiseLike,
}

impl InterferenceType {
    pub fn signal_kind(self) -> SignalKind {
        match self {
            InterferenceType::SpeechLike => SignalKind::SpeechLike,
            InterferenceType::NoiseLike => SignalKind::Pink,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub loudspeaker_angles: Vec<f64>,
    pub snr_conditions: Vec<f64>,
    pub interference_type: InterferenceType,
    pub stage: StageConfig,
    pub seeds: Vec<u64>,
    pub duration_s: f64,
    pub sdr_filter_taps: usize,
    /// Band for suppression and directivity; `None` for the whole spectrum.
    pub band: Option<Band>,
    pub steering_offsets: Vec<f64>,
    pub sweep_step_deg: f64,
    pub probe_seconds: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            loudspeaker_angles: (0..8).map(|i| i as f64 * 45.0).collect(),
            snr_conditions: vec![0.0, 6.0],
            interference_type: InterferenceType::SpeechLike,
            stage: StageConfig::default(),
            seeds: (0..10).collect(),
            duration_s: 3.0,
            sdr_filter_taps: 512,
            band: Some(Band::default()),
            steering_offsets: vec![-4.0, -2.0, 0.0, 2.0, 4.0],
            sweep_step_deg: 5.0,
            probe_seconds: 2.0,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.loudspeaker_angles.is_empty() {
            return Err(Error::config("bench needs at least one loudspeaker angle"));
        }
        for (i, a) in self.loudspeaker_angles.iter().enumerate() {
            if self.loudspeaker_angles[..i]
                .iter()
                .any(|b| (a - b).rem_euclid(360.0).min((b - a).rem_euclid(360.0)) < 1e-9)
            {
                return Err(Error::config(format!(
                    "loudspeaker angle {a} appears twice"
                )));
            }
        }
        if self.snr_conditions.is_empty() {
            return Err(Error::config("bench needs at least one SNR condition"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("bench needs at least one seed"));
        }
        if !(self.duration_s > 0.0) || !(self.probe_seconds > 0.0) {
            return Err(Error::config("signal durations must be positive"));
        }
        if !(self.sweep_step_deg > 0.0) || 360.0 % self.sweep_step_deg > 1e-9 {
            return Err(Error::config("sweep step must divide 360°"));
        }
        Ok(())
    }

    fn samples(&self, seconds: f64) -> usize {
        (seconds * self.stage.rir.sample_rate as f64).round() as usize
    }

    pub fn sweep_config(&self) -> SweepConfig {
        let n = (360.0 / self.sweep_step_deg).round() as usize;
        SweepConfig {
            angles: (0..n).map(|i| i as f64 * self.sweep_step_deg).collect(),
            stage: self.stage.clone(),
            probe: SignalKind::Pink,
            probe_seconds: self.probe_seconds,
            seed: self.seeds[0],
            band: self.band,
        }
    }

    fn describe(&self, report: EvalReport) -> EvalReport {
        let room = match self.stage.mode {
            RoomMode::FreeField => "free-field".to_string(),
            RoomMode::Reverberant { rt60 } => format!("reverberant rt60={rt60}s"),
        };
        let band = self.band.map_or("broadband".to_string(), |b| {
            format!("{}-{} Hz", b.lo_hz, b.hi_hz)
        });
        report
            .with_meta("room", room)
            .with_meta("interference", format!("{:?}", self.interference_type))
            .with_meta("range_m", self.stage.range)
            .with_meta("spacing_m", self.stage.spacing)
            .with_meta("seeds", format!("{:?}", self.seeds))
            .with_meta("band", band)
    }
}

fn condition_label(snr: f64) -> String {
    format!("snr={snr}dB")
}

/// Responses for the target (0°) and every loudspeaker angle.
#[derive(Debug, Clone)]
pub struct BenchRoom {
    pub stage: Stage,
    pub target: SpeakerResponses,
    pub speakers: Vec<SpeakerResponses>,
}

impl BenchRoom {
    pub fn new(config: &BenchConfig) -> Result<Self> {
        config.validate()?;
        let stage = Stage::new(config.stage.clone())?;
        let mut angles = vec![0.0];
        angles.extend(&config.loudspeaker_angles);
        let mut all: Vec<SpeakerResponses> = angles
            .par_iter()
            .map(|&a| stage.responses(a))
            .collect::<Result<_>>()?;
        let target = all.remove(0);
        Ok(BenchRoom {
            stage,
            target,
            speakers: all,
        })
    }
}

/// One enhancement cell: target at 0° plus interference at an angle.
#[derive(Debug, Clone)]
pub struct BenchMixture {
    pub y0: Vec<f64>,
    pub y1: Vec<f64>,
    /// Anechoic target at microphone 0.
    pub reference: Vec<f64>,
    pub target_stems: [Vec<f64>; 2],
    pub interference_stems: [Vec<f64>; 2],
}

impl BenchMixture {
    /// Target-to-interference power ratio at microphone 0, dB.
    pub fn snr_db(&self) -> f64 {
        10.0 * (mean_power(&self.target_stems[0]) / mean_power(&self.interference_stems[0])).log10()
    }
}

pub fn enhancement_mixture(
    room: &BenchRoom,
    config: &BenchConfig,
    speaker: usize,
    snr_db: f64,
    seed: u64,
) -> Result<BenchMixture> {
    let len = config.samples(config.duration_s);
    let fs = config.stage.rir.sample_rate;
    let target = generate(SignalKind::SpeechLike, len, fs, &mut seeded(seed, 0));
    let interference = generate(
        config.interference_type.signal_kind(),
        len,
        fs,
        &mut seeded(seed, 1),
    );
    let t = room.target.render(&target);
    let i = room.speakers[speaker].render(&interference);
    let (pt, pi) = (mean_power(&t[0]), mean_power(&i[0]));
    if !(pt > 0.0 && pi > 0.0) {
        return Err(Error::degenerate(
            "bench source rendered silent at microphone 0",
        ));
    }
    let g = (pt / pi / 10f64.powf(snr_db / 10.0)).sqrt();
    let i = [
        i[0].iter().map(|v| g * v).collect::<Vec<_>>(),
        i[1].iter().map(|v| g * v).collect(),
    ];
    let y0 = t[0].iter().zip(&i[0]).map(|(a, b)| a + b).collect();
    let y1 = t[1].iter().zip(&i[1]).map(|(a, b)| a + b).collect();
    Ok(BenchMixture {
        y0,
        y1,
        reference: convolve(&target, &room.target.anechoic[0]),
        target_stems: t,
        interference_stems: i,
    })
}

/// BSS-SDR per (SNR, interference angle), averaged over seeds.
pub fn run_enhancement_bench(
    separator: &dyn Separator,
    config: &BenchConfig,
) -> Result<EvalReport> {
    let room = BenchRoom::new(config)?;
    run_enhancement_bench_in(separator, config, &room)
}

pub fn run_enhancement_bench_in(
    separator: &dyn Separator,
    config: &BenchConfig,
    room: &BenchRoom,
) -> Result<EvalReport> {
    let cells: Vec<(f64, usize, u64)> = config
        .snr_conditions
        .iter()
        .flat_map(|&snr| {
            (0..config.loudspeaker_angles.len())
                .flat_map(move |k| config.seeds.iter().map(move |&s| (snr, k, s)))
        })
        .collect();
    let scores: Vec<(f64, bool)> = cells
        .par_iter()
        .map(|&(snr, k, seed)| {
            let mix = enhancement_mixture(room, config, k, snr, seed)?;
            let out = separator.separate(&mix.y0, &mix.y1)?;
            let sdr = bss_sdr_detailed(&out, &mix.reference, config.sdr_filter_taps)?;
            Ok((sdr.sdr_db, sdr.regularized))
        })
        .collect::<Result<_>>()?;

    let mut report = config.describe(EvalReport::new(ReportKind::Enhancement, separator.name()));
    for (chunk, cell) in scores
        .chunks(config.seeds.len())
        .zip(cells.iter().step_by(config.seeds.len()))
    {
        let (snr, k, _) = *cell;
        let mut row = ReportRow::from_values(
            config.loudspeaker_angles[k],
            condition_label(snr),
            chunk.iter().map(|s| s.0).collect(),
        );
        row.regularized = chunk.iter().any(|s| s.1);
        report.rows.push(row);
    }
    Ok(report)
}

/// Energy suppression of a lone loudspeaker per angle, averaged over seeds.
pub fn run_suppression_bench(
    separator: &dyn Separator,
    config: &BenchConfig,
) -> Result<EvalReport> {
    let room = BenchRoom::new(config)?;
    run_suppression_bench_in(separator, config, &room)
}

pub fn run_suppression_bench_in(
    separator: &dyn Separator,
    config: &BenchConfig,
    room: &BenchRoom,
) -> Result<EvalReport> {
    let len = config.samples(config.duration_s);
    let fs = config.stage.rir.sample_rate;
    let cells: Vec<(usize, u64)> = (0..room.speakers.len())
        .flat_map(|k| config.seeds.iter().map(move |&s| (k, s)))
        .collect();
    let values: Vec<f64> = cells
        .par_iter()
        .map(|&(k, seed)| {
            let signal = generate(
                config.interference_type.signal_kind(),
                len,
                fs,
                &mut seeded(seed, 1),
            );
            let [y0, y1] = room.speakers[k].render(&signal);
            let out = separator.separate(&y0, &y1)?;
            measured_suppression_db(&y0, &out, fs, config.band)
        })
        .collect::<Result<_>>()?;
    let mut report = config.describe(EvalReport::new(ReportKind::Suppression, separator.name()));
    for (k, chunk) in values.chunks(config.seeds.len()).enumerate() {
        report.rows.push(ReportRow::from_values(
            config.loudspeaker_angles[k],
            "lone",
            chunk.to_vec(),
        ));
    }
    Ok(report)
}

/// Directivity sweep for one steering offset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeringSweep {
    pub offset: f64,
    pub points: Vec<DirectivityPoint>,
}

pub fn offset_label(offset: f64) -> String {
    format!("offset={offset:+}")
}

/// One directivity sweep per offset, each taken with `separator` steered by
/// that offset.
pub fn run_steering_bench(
    separator: &dyn Separator,
    offsets: &[f64],
    config: &BenchConfig,
) -> Result<Vec<SteeringSweep>> {
    config.validate()?;
    let prepared = PreparedSweep::new(config.sweep_config())?;
    offsets
        .iter()
        .map(|&offset| {
            let steered = separator.steered(offset)?;
            Ok(SteeringSweep {
                offset,
                points: prepared.measure(steered.as_ref())?,
            })
        })
        .collect()
}

/// Flattens steering sweeps into a directivity report, one condition per
/// offset.
pub fn steering_report(
    separator: &dyn Separator,
    sweeps: &[SteeringSweep],
    config: &BenchConfig,
) -> EvalReport {
    let mut report = config.describe(EvalReport::new(ReportKind::Directivity, separator.name()));
    for s in sweeps {
        for p in &s.points {
            report.rows.push(ReportRow::from_values(
                p.angle_deg,
                offset_label(s.offset),
                vec![p.gain_db],
            ));
        }
    }
    report
}

/// MCWF calibrated in the bench room: signal covariance from the 0° target,
/// noise covariance from every loudspeaker off the 0°/180° axis.
pub fn calibrated_mcwf(room: &BenchRoom, config: &BenchConfig, seed: u64) -> Result<McwfSeparator> {
    let len = config.samples(config.duration_s);
    let fs = config.stage.rir.sample_rate;
    let calib = |stream: u64| {
        generate(
            SignalKind::SpeechLike,
            len,
            fs,
            &mut seeded(seed, 100 + stream),
        )
    };
    let signal = room.target.render(&calib(0));
    let noise: Vec<[Vec<f64>; 2]> = room
        .speakers
        .iter()
        .enumerate()
        .filter(|(_, s)| s.placement.angle_to_zero_plane.abs() > 1e-6)
        .map(|(k, s)| s.render(&calib(1 + k as u64)))
        .collect();
    if noise.is_empty() {
        return Err(Error::config(
            "no off-axis loudspeaker available for noise calibration",
        ));
    }
    let noise_views: Vec<[&[f64]; 2]> = noise
        .iter()
        .map(|[a, b]| [a.as_slice(), b.as_slice()])
        .collect();
    McwfSeparator::calibrate(
        &[[&signal[0], &signal[1]]],
        &noise_views,
        crate::dsp::StftConfig::ANALYSIS,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::separator::{IdentitySeparator, InputDelay, IpdSeparator};

    fn small() -> BenchConfig {
        BenchConfig {
            seeds: vec![0, 1],
            duration_s: 1.0,
            ..Default::default()
        }
    }

    #[test]
    fn validation() {
        let mut c = small();
        c.loudspeaker_angles = vec![0.0, 360.0];
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        c = small();
        c.snr_conditions.clear();
        assert!(c.validate().is_err());
    }

    #[test]
    fn mixture_meets_the_requested_snr() {
        let cfg = small();
        let room = BenchRoom::new(&cfg).unwrap();
        for snr in [0.0, 6.0, -3.5] {
            let m = enhancement_mixture(&room, &cfg, 2, snr, 7).unwrap();
            assert!((m.snr_db() - snr).abs() < 0.05);
        }
    }

    #[test]
    fn identity_suppression_is_zero() {
        let cfg = small();
        let r = run_suppression_bench(&IdentitySeparator, &cfg).unwrap();
        assert_eq!(r.rows.len(), 8);
        assert!(r.rows.iter().all(|row| row.mean_db == 0.0));
    }

    #[test]
    fn identity_enhancement_is_the_raw_mixture_and_improves_with_snr() {
        let cfg = BenchConfig {
            loudspeaker_angles: vec![45.0, 90.0],
            ..small()
        };
        let room = BenchRoom::new(&cfg).unwrap();
        let r = run_enhancement_bench_in(&IdentitySeparator, &cfg, &room).unwrap();
        let m = enhancement_mixture(&room, &cfg, 1, 0.0, 1).unwrap();
        let raw = crate::metrics::bss_sdr(&m.y0, &m.reference, 512).unwrap();
        assert_eq!(r.row(90.0, "snr=0dB").unwrap().values[1], raw);
        for a in [45.0, 90.0] {
            assert!(r.value(a, "snr=6dB").unwrap() > r.value(a, "snr=0dB").unwrap());
        }
    }

    #[test]
    fn steering_zero_reduces_to_a_single_sweep() {
        let cfg = BenchConfig {
            sweep_step_deg: 45.0,
            probe_seconds: 0.5,
            ..small()
        };
        let sep = IpdSeparator::default();
        let sweeps = run_steering_bench(&sep, &[0.0], &cfg).unwrap();
        let direct = crate::metrics::directivity_sweep(&sep, &cfg.sweep_config()).unwrap();
        assert_eq!(sweeps.len(), 1);
        assert_eq!(sweeps[0].points, direct);
    }

    #[test]
    fn input_delay_matches_native_steering_for_integer_offsets() {
        let cfg = small();
        let room = BenchRoom::new(&cfg).unwrap();
        let m = enhancement_mixture(&room, &cfg, 2, 0.0, 3).unwrap();
        let base = IpdSeparator::default();
        let native = base.steered(2.0).unwrap().separate(&m.y0, &m.y1).unwrap();
        let generic = InputDelay {
            inner: &base,
            offset: 2.0,
            max_offset: 8.0,
        }
        .separate(&m.y0, &m.y1)
        .unwrap();
        let e: f64 = native
            .iter()
            .zip(&generic)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let n: f64 = native.iter().map(|a| a * a).sum();
        assert!(e / n < 1e-2, "{}", e / n);
    }
}
