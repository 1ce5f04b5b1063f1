//! Directivity patterns: separator gain for a lone loudspeaker swept around
//! the microphone pair.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::energy::{measured_suppression_db, Band};
use crate::error::{Error, Result};
use crate::separator::Separator;
use crate::signals::{generate, SignalKind};
use crate::stage::{wrap_azimuth, Stage, StageConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Azimuths in degrees.
    pub angles: Vec<f64>,
    pub stage: StageConfig,
    pub probe: SignalKind,
    pub probe_seconds: f64,
    pub seed: u64,
    /// Measurement band; `None` measures the whole spectrum.
    pub band: Option<Band>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            angles: (0..72).map(|i| i as f64 * 5.0).collect(),
            stage: StageConfig::default(),
            probe: SignalKind::Pink,
            probe_seconds: 2.0,
            seed: 0,
            band: Some(Band::default()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectivityPoint {
    pub angle_deg: f64,
    pub gain_db: f64,
}

/// Probe renders for every angle, reusable across separators.
#[derive(Debug, Clone)]
pub struct PreparedSweep {
    pub config: SweepConfig,
    captures: Vec<[Vec<f64>; 2]>,
}

impl PreparedSweep {
    pub fn new(config: SweepConfig) -> Result<Self> {
        if config.angles.is_empty() {
            return Err(Error::config("sweep needs at least one angle"));
        }
        let stage = Stage::new(config.stage.clone())?;
        let fs = config.stage.rir.sample_rate;
        let len = (config.probe_seconds * fs as f64).round() as usize;
        let probe = generate(
            config.probe,
            len,
            fs,
            &mut ChaCha8Rng::seed_from_u64(config.seed),
        );
        let captures = config
            .angles
            .par_iter()
            .map(|&az| Ok(stage.responses(az)?.render(&probe)))
            .collect::<Result<_>>()?;
        Ok(PreparedSweep { config, captures })
    }

    pub fn measure(&self, separator: &dyn Separator) -> Result<Vec<DirectivityPoint>> {
        let fs = self.config.stage.rir.sample_rate;
        self.config
            .angles
            .par_iter()
            .zip(&self.captures)
            .map(|(&az, [y0, y1])| {
                let out = separator.separate(y0, y1)?;
                let s = measured_suppression_db(y0, &out, fs, self.config.band)?;
                Ok(DirectivityPoint {
                    angle_deg: az,
                    gain_db: -s,
                })
            })
            .collect()
    }
}

pub fn directivity_sweep(
    separator: &dyn Separator,
    config: &SweepConfig,
) -> Result<Vec<DirectivityPoint>> {
    PreparedSweep::new(config.clone())?.measure(separator)
}

/// Gain at the sweep angle closest to `azimuth_deg` (modulo 360).
pub fn gain_at(sweep: &[DirectivityPoint], azimuth_deg: f64) -> Option<f64> {
    sweep
        .iter()
        .min_by(|a, b| {
            let da = wrap_azimuth(a.angle_deg - azimuth_deg).abs();
            let db = wrap_azimuth(b.angle_deg - azimuth_deg).abs();
            da.total_cmp(&db)
        })
        .map(|p| p.gain_db)
}

/// Power-weighted mean azimuth over the front half (-90°..90°): where the
/// passband sits.
pub fn passband_center(sweep: &[DirectivityPoint]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for p in sweep {
        let az = wrap_azimuth(p.angle_deg);
        if az.abs() <= 90.0 {
            let w = 10f64.powf(p.gain_db / 10.0);
            num += w * az;
            den += w;
        }
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Largest gain difference between each angle and its image under `map`,
/// over the angles whose image lies on the grid.
pub fn asymmetry_db(
    a: &[DirectivityPoint],
    b: &[DirectivityPoint],
    map: impl Fn(f64) -> f64,
) -> f64 {
    let mut worst: f64 = 0.0;
    for p in a {
        let target = wrap_azimuth(map(p.angle_deg));
        if let Some(q) = b
            .iter()
            .find(|q| (wrap_azimuth(q.angle_deg) - target).abs() < 1e-6)
        {
            worst = worst.max((p.gain_db - q.gain_db).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::separator::IdentitySeparator;

    #[test]
    fn identity_is_flat() {
        let cfg = SweepConfig {
            angles: vec![0.0, 45.0, 90.0, 200.0],
            probe_seconds: 0.5,
            ..Default::default()
        };
        for p in directivity_sweep(&IdentitySeparator, &cfg).unwrap() {
            assert_eq!(p.gain_db, 0.0);
        }
    }

    #[test]
    fn helpers() {
        let sweep: Vec<DirectivityPoint> =
            [(0.0, -1.0), (90.0, -20.0), (180.0, -1.0), (270.0, -20.0)]
                .iter()
                .map(|&(angle_deg, gain_db)| DirectivityPoint { angle_deg, gain_db })
                .collect();
        assert_eq!(gain_at(&sweep, -88.0), Some(-20.0));
        assert!(passband_center(&sweep).abs() < 1e-12);
        assert_eq!(asymmetry_db(&sweep, &sweep, |a| -a), 0.0);
        assert_eq!(asymmetry_db(&sweep, &sweep, |a| a + 90.0), 19.0);
    }
}
