//! Two-microphone coordinate frame, angular regions and scene sampling.
//!
//! All angles are measured from the 0° plane: the plane through the
//! microphone midpoint orthogonal to the microphone axis. Angles are signed
//! in [-90°, 90°], positive on the side of the second microphone
//! (`position_b`). A two-microphone array cannot tell the front lobe from the
//! back lobe, so placements additionally carry a front/back flag.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPEED_OF_SOUND: f64 = 343.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, other: Vec3) -> f64 {
        (self - other).norm()
    }

    pub fn normalized(self) -> Vec3 {
        self * (1.0 / self.norm())
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MicPair {
    pub position_a: Vec3,
    pub position_b: Vec3,
    pub spacing: f64,
}

impl MicPair {
    /// Builds a pair centred on `midpoint` whose axis (a → b) points along `axis`.
    pub fn new(midpoint: Vec3, axis: Vec3, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::config(format!(
                "microphone spacing must be positive, got {spacing}"
            )));
        }
        if !(axis.norm() > 0.0) {
            return Err(Error::degenerate("microphone axis has zero length"));
        }
        let half = axis.normalized() * (spacing / 2.0);
        Ok(MicPair {
            position_a: midpoint - half,
            position_b: midpoint + half,
            spacing,
        })
    }

    pub fn midpoint(&self) -> Vec3 {
        (self.position_a + self.position_b) * 0.5
    }

    /// Unit vector from microphone a to microphone b.
    pub fn axis(&self) -> Vec3 {
        (self.position_b - self.position_a).normalized()
    }

    /// Unit vector on the 0° plane defining the "front" lobe: horizontal when
    /// the axis is not vertical.
    pub fn broadside(&self) -> Vec3 {
        let axis = self.axis();
        let up = Vec3::new(0.0, 0.0, 1.0);
        let b = up.cross(axis);
        if b.norm() < 1e-9 {
            Vec3::new(1.0, 0.0, 0.0)
        } else {
            b.normalized()
        }
    }

    pub fn swapped(&self) -> MicPair {
        MicPair {
            position_a: self.position_b,
            position_b: self.position_a,
            spacing: self.spacing,
        }
    }

    pub fn positions(&self) -> [Vec3; 2] {
        [self.position_a, self.position_b]
    }

    /// Point at `range` metres from the midpoint, `angle_deg` from the 0° plane,
    /// rotated by `roll_rad` about the microphone axis (0 = front broadside).
    pub fn point_at(&self, angle_deg: f64, roll_rad: f64, range: f64) -> Vec3 {
        let axis = self.axis();
        let u = self.broadside();
        let v = axis.cross(u);
        let a = angle_deg.to_radians();
        let radial = u * roll_rad.cos() + v * roll_rad.sin();
        self.midpoint() + (axis * a.sin() + radial * a.cos()) * range
    }

    /// Point in the horizontal plane at azimuth `azimuth_deg` measured clockwise
    /// from the front broadside direction toward microphone b. Azimuths 90° and
    /// 270° are endfire.
    pub fn point_at_azimuth(&self, azimuth_deg: f64, range: f64) -> Vec3 {
        let az = azimuth_deg.to_radians();
        let dir = self.broadside() * az.cos() + self.axis() * az.sin();
        self.midpoint() + dir * range
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngularRegionSpec {
    /// Target half-width in degrees.
    pub theta: f64,
    /// Minimum interference offset from the 0° plane in degrees.
    pub phi: f64,
}

impl Default for AngularRegionSpec {
    fn default() -> Self {
        AngularRegionSpec {
            theta: 30.0,
            phi: 60.0,
        }
    }
}

impl AngularRegionSpec {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        let spec = AngularRegionSpec { theta, phi };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.theta && self.theta < self.phi && self.phi < 90.0) {
            return Err(Error::config(format!(
                "angular regions need 0 < theta < phi < 90, got theta={} phi={}",
                self.theta, self.phi
            )));
        }
        Ok(())
    }

    pub fn admits(&self, role: SourceRole, angle_deg: f64) -> bool {
        match role {
            SourceRole::Target1 | SourceRole::Target2 => angle_deg.abs() <= self.theta,
            SourceRole::Interference => angle_deg.abs() >= self.phi,
            SourceRole::Noise => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceRole {
    Target1,
    Target2,
    Interference,
    Noise,
}

impl SourceRole {
    pub const ALL: [SourceRole; 4] = [
        SourceRole::Target1,
        SourceRole::Target2,
        SourceRole::Interference,
        SourceRole::Noise,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SourceRole::Target1 => "target1",
            SourceRole::Target2 => "target2",
            SourceRole::Interference => "interference",
            SourceRole::Noise => "noise",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourcePlacement {
    pub position: Vec3,
    pub role: SourceRole,
    pub angle_to_zero_plane: f64,
    /// True when the source lies on the broadside side of the 0° plane.
    pub front: bool,
    pub distance_to_origin: f64,
}

impl SourcePlacement {
    pub fn new(position: Vec3, role: SourceRole, mics: &MicPair) -> Result<Self> {
        let angle = angle_to_zero_plane(position, mics)?;
        let rel = position - mics.midpoint();
        Ok(SourcePlacement {
            position,
            role,
            angle_to_zero_plane: angle,
            front: rel.dot(mics.broadside()) >= 0.0,
            distance_to_origin: rel.norm(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    pub dimensions: Vec3,
    pub rt60: f64,
    pub wall_reflection: f64,
    pub mic_pair: MicPair,
    pub sources: Vec<SourcePlacement>,
}

impl RoomSpec {
    /// Room with anechoic walls. Its rt60 is the Sabine value at full absorption.
    pub fn free_field(dimensions: Vec3, mic_pair: MicPair, sources: Vec<SourcePlacement>) -> Self {
        RoomSpec {
            dimensions,
            rt60: sabine_rt60(dimensions, 0.0, SPEED_OF_SOUND).unwrap_or(0.0),
            wall_reflection: 0.0,
            mic_pair,
            sources,
        }
    }

    pub fn with_rt60(
        dimensions: Vec3,
        rt60: f64,
        mic_pair: MicPair,
        sources: Vec<SourcePlacement>,
    ) -> Result<Self> {
        let wall_reflection = sabine_reflection(dimensions, rt60, SPEED_OF_SOUND)?;
        Ok(RoomSpec {
            dimensions,
            rt60,
            wall_reflection,
            mic_pair,
            sources,
        })
    }

    pub fn contains(&self, p: Vec3, margin: f64) -> bool {
        let d = self.dimensions;
        p.x >= margin
            && p.y >= margin
            && p.z >= margin
            && p.x <= d.x - margin
            && p.y <= d.y - margin
            && p.z <= d.z - margin
    }

    pub fn source(&self, role: SourceRole) -> Option<&SourcePlacement> {
        self.sources.iter().find(|s| s.role == role)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("room spec serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format {
            path: "<room spec>".into(),
            message: e.to_string(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.into(),
            message: e.to_string(),
        })
    }
}

/// Sabine reverberation time for a uniform wall reflection coefficient.
pub fn sabine_rt60(dimensions: Vec3, wall_reflection: f64, c: f64) -> Result<f64> {
    let alpha = 1.0 - wall_reflection * wall_reflection;
    if !(alpha > 0.0) {
        return Err(Error::config("fully reflective walls have no finite rt60"));
    }
    let (volume, surface) = volume_surface(dimensions);
    Ok(24.0 * std::f64::consts::LN_10 * volume / (c * surface * alpha))
}

/// Uniform wall reflection coefficient realising `rt60` under Sabine's formula.
pub fn sabine_reflection(dimensions: Vec3, rt60: f64, c: f64) -> Result<f64> {
    if !(rt60 > 0.0) {
        return Err(Error::config(format!("rt60 must be positive, got {rt60}")));
    }
    let (volume, surface) = volume_surface(dimensions);
    let alpha = 24.0 * std::f64::consts::LN_10 * volume / (c * surface * rt60);
    if alpha > 1.0 {
        return Err(Error::config(format!(
            "rt60 {rt60:.3} s is below the anechoic limit of this room"
        )));
    }
    Ok((1.0 - alpha).sqrt())
}

fn volume_surface(d: Vec3) -> (f64, f64) {
    (d.x * d.y * d.z, 2.0 * (d.x * d.y + d.x * d.z + d.y * d.z))
}

/// Signed angle in degrees between the position vector (relative to the
/// microphone midpoint) and the 0° plane.
pub fn angle_to_zero_plane(position: Vec3, mics: &MicPair) -> Result<f64> {
    let rel = position - mics.midpoint();
    let r = rel.norm();
    if !(r > 0.0) {
        return Err(Error::degenerate(
            "position coincides with the microphone midpoint",
        ));
    }
    let s = (rel.dot(mics.axis()) / r).clamp(-1.0, 1.0);
    Ok(s.asin().to_degrees())
}

/// Time difference of arrival in seconds: positive when the source is closer
/// to microphone b, so it reaches channel 1 first.
pub fn tdoa(position: Vec3, mics: &MicPair, speed_of_sound: f64) -> Result<f64> {
    if position.distance(mics.midpoint()) == 0.0 {
        return Err(Error::degenerate(
            "position coincides with the microphone midpoint",
        ));
    }
    Ok((position.distance(mics.position_a) - position.distance(mics.position_b)) / speed_of_sound)
}

/// Far-field approximation of [`tdoa`].
pub fn far_field_tdoa(angle_deg: f64, spacing: f64, speed_of_sound: f64) -> f64 {
    spacing * angle_deg.to_radians().sin() / speed_of_sound
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub regions: AngularRegionSpec,
    /// Microphone spacing range in metres, sampled uniformly.
    pub spacing: [f64; 2],
    pub room_min: [f64; 3],
    pub room_max: [f64; 3],
    pub rt60: [f64; 2],
    pub source_range: [f64; 2],
    pub wall_margin: f64,
    pub max_attempts: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            regions: AngularRegionSpec::default(),
            spacing: [0.09, 0.11],
            room_min: [3.0, 3.0, 2.4],
            room_max: [8.0, 8.0, 3.5],
            rt60: [0.2, 0.6],
            source_range: [0.4, 2.5],
            wall_margin: 0.3,
            max_attempts: 10_000,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        self.regions.validate()?;
        let ordered = |r: [f64; 2], what: &str| {
            if r[0] > 0.0 && r[0] <= r[1] && r[1].is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!(
                    "{what} range must satisfy 0 < lo <= hi, got {r:?}"
                )))
            }
        };
        ordered(self.spacing, "microphone spacing")?;
        ordered(self.rt60, "rt60")?;
        ordered(self.source_range, "source range")?;
        for i in 0..3 {
            ordered([self.room_min[i], self.room_max[i]], "room dimension")?;
        }
        if self.wall_margin < 0.0 {
            return Err(Error::config("wall margin must be non-negative"));
        }
        if self.max_attempts == 0 {
            return Err(Error::config("max_attempts must be at least 1"));
        }
        Ok(())
    }
}

fn uniform(rng: &mut impl Rng, range: [f64; 2]) -> f64 {
    if range[0] == range[1] {
        range[0]
    } else {
        rng.random_range(range[0]..range[1])
    }
}

/// Draws a sine of the angle to the 0° plane consistent with `role`, so that
/// directions are uniform over the corresponding spherical zone.
fn sample_sin_angle(rng: &mut impl Rng, role: SourceRole, regions: &AngularRegionSpec) -> f64 {
    match role {
        SourceRole::Target1 | SourceRole::Target2 => {
            let s = regions.theta.to_radians().sin();
            rng.random_range(-s..s)
        }
        SourceRole::Interference => {
            let lo = regions.phi.to_radians().sin();
            let mag = rng.random_range(lo..=1.0);
            if rng.random_bool(0.5) {
                mag
            } else {
                -mag
            }
        }
        SourceRole::Noise => rng.random_range(-1.0..=1.0),
    }
}

/// Placement draws for one source before the room itself is redrawn.
const PLACEMENT_TRIES_PER_ROOM: usize = 200;

/// Samples a room, a microphone pair and the four source placements.
///
/// Deterministic in `seed`. Up to `max_attempts` candidate draws are made
/// across the whole scene before giving up.
pub fn sample_scene(config: &SamplerConfig, seed: u64) -> Result<RoomSpec> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_scene_with(config, &mut rng)
}

pub fn sample_scene_with(config: &SamplerConfig, rng: &mut impl Rng) -> Result<RoomSpec> {
    let margin = config.wall_margin;
    let mut attempts = 0usize;
    let mut last_reason = String::from("no attempt made");

    'room: while attempts < config.max_attempts {
        attempts += 1;
        let dims = Vec3::new(
            uniform(rng, [config.room_min[0], config.room_max[0]]),
            uniform(rng, [config.room_min[1], config.room_max[1]]),
            uniform(rng, [config.room_min[2], config.room_max[2]]),
        );
        let rt60 = uniform(rng, config.rt60);
        let spacing = uniform(rng, config.spacing);
        let azimuth = rng.random_range(0.0..2.0 * PI);
        let axis = Vec3::new(azimuth.cos(), azimuth.sin(), 0.0);
        let inner = margin + spacing / 2.0;
        if dims.x <= 2.0 * inner || dims.y <= 2.0 * inner || dims.z <= 2.0 * margin {
            last_reason = format!("room {dims:?} too small for the wall margin");
            continue;
        }
        let mid = Vec3::new(
            rng.random_range(inner..dims.x - inner),
            rng.random_range(inner..dims.y - inner),
            rng.random_range(margin..dims.z - margin),
        );
        let mics = MicPair::new(mid, axis, spacing)?;
        let wall_reflection = match sabine_reflection(dims, rt60, SPEED_OF_SOUND) {
            Ok(b) => b,
            Err(e) => {
                last_reason = e.to_string();
                continue;
            }
        };
        let probe = RoomSpec {
            dimensions: dims,
            rt60,
            wall_reflection,
            mic_pair: mics,
            sources: Vec::with_capacity(4),
        };

        let mut sources = Vec::with_capacity(4);
        for role in SourceRole::ALL {
            let mut tries = 0;
            loop {
                if attempts >= config.max_attempts {
                    break 'room;
                }
                if tries == PLACEMENT_TRIES_PER_ROOM {
                    // This room and array pose leave no space for the source.
                    continue 'room;
                }
                attempts += 1;
                tries += 1;
                let sin_a = sample_sin_angle(rng, role, &config.regions);
                let roll = rng.random_range(0.0..2.0 * PI);
                let range = uniform(rng, config.source_range);
                let pos = mics.point_at(sin_a.asin().to_degrees(), roll, range);
                if !probe.contains(pos, margin) {
                    last_reason =
                        format!("{} placement fell outside the wall margin", role.as_str());
                    continue;
                }
                let placement = SourcePlacement::new(pos, role, &mics)?;
                if !config.regions.admits(role, placement.angle_to_zero_plane) {
                    continue;
                }
                sources.push(placement);
                break;
            }
        }
        return Ok(RoomSpec { sources, ..probe });
    }
    Err(Error::SamplingExhausted {
        attempts,
        reason: last_reason,
    })
}
