//! A simulated listening room: a fixed microphone pair in the middle of a
//! shoebox room and loudspeakers placed on a horizontal circle around it.
//!
//! Azimuth 0° is the front broadside direction and azimuth 90° points at
//! microphone 1, so within the front half azimuth and signed angle to the 0°
//! plane coincide.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{MicPair, RoomSpec, SourcePlacement, SourceRole, Vec3};
use crate::rir::{make_rir_matrix, Rir, RirParams};
use crate::synth::convolve;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum RoomMode {
    FreeField,
    Reverberant { rt60: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageConfig {
    pub dimensions: [f64; 3],
    pub mic_height: f64,
    pub spacing: f64,
    /// Loudspeaker distance from the microphone midpoint in metres.
    pub range: f64,
    pub mode: RoomMode,
    pub rir: RirParams,
}

impl Default for StageConfig {
    fn default() -> Self {
        StageConfig {
            dimensions: [6.0, 5.0, 3.0],
            mic_height: 1.2,
            spacing: 0.10,
            range: 1.0,
            mode: RoomMode::FreeField,
            rir: RirParams::default(),
        }
    }
}

/// Responses from one loudspeaker to both microphones, peak-normalised
/// jointly, with their strongest-path reductions.
#[derive(Debug, Clone)]
pub struct SpeakerResponses {
    pub azimuth_deg: f64,
    pub placement: SourcePlacement,
    pub rirs: [Rir; 2],
    pub anechoic: [Rir; 2],
}

impl SpeakerResponses {
    /// The signal as captured at both microphones.
    pub fn render(&self, signal: &[f64]) -> [Vec<f64>; 2] {
        [
            convolve(signal, &self.rirs[0]),
            convolve(signal, &self.rirs[1]),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct Stage {
    pub config: StageConfig,
    pub mics: MicPair,
    room: RoomSpec,
}

impl Stage {
    pub fn new(config: StageConfig) -> Result<Self> {
        let [x, y, z] = config.dimensions;
        let dims = Vec3::new(x, y, z);
        let mid = Vec3::new(x / 2.0, y / 2.0, config.mic_height);
        let mics = MicPair::new(mid, Vec3::new(1.0, 0.0, 0.0), config.spacing)?;
        let room = match config.mode {
            RoomMode::FreeField => RoomSpec::free_field(dims, mics, Vec::new()),
            RoomMode::Reverberant { rt60 } => RoomSpec::with_rt60(dims, rt60, mics, Vec::new())?,
        };
        let reach = config.range + 0.3;
        if !(config.range > 0.0)
            || !room.contains(mid + Vec3::new(reach, 0.0, 0.0), 0.0)
            || !room.contains(mid + Vec3::new(0.0, reach, 0.0), 0.0)
            || !room.contains(mid - Vec3::new(reach, reach, 0.0), 0.0)
        {
            return Err(Error::config(format!(
                "loudspeaker circle of radius {} m does not fit the room with a 0.3 m margin",
                config.range
            )));
        }
        Ok(Stage { config, mics, room })
    }

    pub fn speaker_position(&self, azimuth_deg: f64) -> Vec3 {
        self.mics.point_at_azimuth(azimuth_deg, self.config.range)
    }

    pub fn responses(&self, azimuth_deg: f64) -> Result<SpeakerResponses> {
        let placement = SourcePlacement::new(
            self.speaker_position(azimuth_deg),
            SourceRole::Interference,
            &self.mics,
        )?;
        let room = RoomSpec {
            sources: vec![placement],
            ..self.room.clone()
        };
        let matrix = make_rir_matrix(&room, &self.config.rir)?;
        let [r0, r1] = matrix.entries.into_iter().next().expect("one source");
        let [a0, a1] = matrix
            .anechoic_entries
            .into_iter()
            .next()
            .expect("one source");
        Ok(SpeakerResponses {
            azimuth_deg,
            placement,
            rirs: [r0, r1],
            anechoic: [a0, a1],
        })
    }
}

/// Wraps an azimuth into (-180, 180].
pub fn wrap_azimuth(deg: f64) -> f64 {
    let w = deg.rem_euclid(360.0);
    if w > 180.0 {
        w - 360.0
    } else {
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{far_field_tdoa, tdoa};

    #[test]
    fn azimuth_matches_signed_angle_in_front() {
        let stage = Stage::new(StageConfig::default()).unwrap();
        for az in [-90.0, -45.0, 0.0, 30.0, 90.0] {
            let r = stage.responses(az).unwrap();
            assert!((r.placement.angle_to_zero_plane - az).abs() < 1e-9, "{az}");
            assert!(r.placement.front || az.abs() == 90.0);
        }
        let back = stage.responses(150.0).unwrap();
        assert!((back.placement.angle_to_zero_plane - 30.0).abs() < 1e-9);
        assert!(!back.placement.front);
    }

    #[test]
    fn free_field_responses_carry_the_tdoa() {
        let stage = Stage::new(StageConfig::default()).unwrap();
        let r = stage.responses(90.0).unwrap();
        let d0 = r.rirs[0].direct_delay().unwrap();
        let d1 = r.rirs[1].direct_delay().unwrap();
        let exact = tdoa(stage.speaker_position(90.0), &stage.mics, 343.0).unwrap() * 16_000.0;
        assert!((d0 - d1 - exact).abs() < 1e-9);
        assert!((exact - far_field_tdoa(90.0, 0.1, 343.0) * 16_000.0).abs() < 1e-9);
        assert_eq!(r.rirs[0].samples, r.anechoic[0].samples);
        let peak = r.rirs[0].peak().max(r.rirs[1].peak());
        assert_eq!(peak, 1.0);
    }

    #[test]
    fn oversized_circle_is_rejected() {
        let cfg = StageConfig {
            range: 2.6,
            ..Default::default()
        };
        assert!(matches!(Stage::new(cfg), Err(Error::Config(_))));
    }

    #[test]
    fn wrapping() {
        assert_eq!(wrap_azimuth(270.0), -90.0);
        assert_eq!(wrap_azimuth(180.0), 180.0);
        assert_eq!(wrap_azimuth(-45.0), -45.0);
    }
}
