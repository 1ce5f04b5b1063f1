//! Global TOML configuration shared by every command.
//!
//! Every key has a default, so an empty file is a valid configuration.
//! Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bench::BenchConfig;
use crate::dataset::SynthConfig;
use crate::error::{Error, Result};
use crate::geometry::SamplerConfig;
use crate::rir::RirParams;
use crate::separator::SeparatorConfig;

/// Separator settings in user-facing units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeparatorSection {
    /// Half-width of the accepted TDOA band in microseconds.
    pub tau_max_us: f64,
    pub mask_floor: f64,
    pub mask_softness: f64,
    pub steering_offset_samples: f64,
}

impl Default for SeparatorSection {
    fn default() -> Self {
        SeparatorSection::from(&SeparatorConfig::default())
    }
}

impl From<&SeparatorConfig> for SeparatorSection {
    fn from(c: &SeparatorConfig) -> Self {
        SeparatorSection {
            tau_max_us: c.tau_max * 1e6,
            mask_floor: c.mask_floor,
            mask_softness: c.mask_softness,
            steering_offset_samples: c.steering_offset,
        }
    }
}

impl SeparatorSection {
    pub fn to_config(&self, sample_rate: u32) -> Result<SeparatorConfig> {
        let config = SeparatorConfig {
            tau_max: self.tau_max_us * 1e-6,
            mask_floor: self.mask_floor,
            mask_softness: self.mask_softness,
            steering_offset: self.steering_offset_samples,
            sample_rate,
            ..SeparatorConfig::default()
        };
        // An out-of-range offset read from a file is a configuration problem.
        config.validate().map_err(|e| match e {
            Error::Contract(msg) => Error::Config(msg),
            other => other,
        })?;
        Ok(config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlobalConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Worker threads; 0 uses one per core.
    pub workers: usize,
    pub geometry: SamplerConfig,
    pub rir: RirParams,
    pub synth: SynthConfig,
    pub separator: SeparatorSection,
    pub bench: BenchConfig,
}

impl Default for GlobalConfig {
    fn default() -> Self {
        GlobalConfig {
            seed: 0,
            output_dir: PathBuf::from("out"),
            workers: 0,
            geometry: SamplerConfig::default(),
            rir: RirParams::default(),
            synth: SynthConfig::default(),
            separator: SeparatorSection::default(),
            bench: BenchConfig::default(),
        }
    }
}

impl GlobalConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: GlobalConfig =
            toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.rir.validate()?;
        self.synth.validate()?;
        self.separator.to_config(self.rir.sample_rate)?;
        self.bench.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_the_defaults() {
        let c = GlobalConfig::from_toml("").unwrap();
        assert_eq!(c, GlobalConfig::default());
        assert_eq!(c.geometry.regions.theta, 30.0);
        assert_eq!(c.geometry.regions.phi, 60.0);
        assert_eq!((c.synth.p1, c.synth.p2), (0.8, 0.6));
        assert_eq!(c.synth.gains.g_global.mean, -10.0);
        // 0.1 m · sin 30° / 343 m/s
        assert!((c.separator.tau_max_us - 145.773).abs() < 1e-3);
    }

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = GlobalConfig::default();
        assert_eq!(GlobalConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn sections_override_fields() {
        let c = GlobalConfig::from_toml(
            "seed = 9\n[geometry.regions]\ntheta = 20.0\nphi = 70.0\n[separator]\nmask_floor = 0.1\n",
        )
        .unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.geometry.regions.theta, 20.0);
        assert_eq!(c.separator.mask_floor, 0.1);
        assert_eq!(c.separator.mask_softness, 0.5);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in [
            "colour = 1",
            "[separator]\ntau_max = 1.0",
            "[synth]\np3 = 0.1",
        ] {
            assert!(
                matches!(GlobalConfig::from_toml(text), Err(Error::Config(_))),
                "{text}"
            );
        }
    }

    #[test]
    fn invalid_values_are_config_errors() {
        for text in [
            "[geometry.regions]\ntheta = 70.0",
            "[separator]\ntau_max_us = 400.0",
            "[synth]\np1 = 2.0",
            "[separator]\nsteering_offset_samples = 12.0",
        ] {
            assert!(
                matches!(GlobalConfig::from_toml(text), Err(Error::Config(_))),
                "{text}"
            );
        }
    }
}
