//! Energy ratios between a separator's input and output.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::separator::LATENCY;

/// Cap applied when the output is silent.
pub const SUPPRESSION_CAP_DB: f64 = 100.0;

/// Frequency band used for energy measurements. The default spans the range
/// where a 10 cm pair can separate directions: above it phase differences
/// alias, below it they are too small to discriminate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Band {
    pub lo_hz: f64,
    pub hi_hz: f64,
}

impl Default for Band {
    fn default() -> Self {
        Band {
            lo_hz: 500.0,
            hi_hz: 1700.0,
        }
    }
}

pub fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Energy of `x` restricted to `band` (whole spectrum when `None`).
pub fn band_energy(x: &[f64], sample_rate: u32, band: Option<Band>) -> f64 {
    let Some(band) = band else {
        return energy(x);
    };
    let n = x.len();
    if n == 0 {
        return 0.0;
    }
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let df = sample_rate as f64 / n as f64;
    // Two-sided sum over the positive and mirrored negative bins, scaled so a
    // band covering everything reproduces the time-domain energy.
    buf.iter()
        .enumerate()
        .filter(|(k, _)| {
            let f = (*k).min(n - *k) as f64 * df;
            f >= band.lo_hz && f <= band.hi_hz
        })
        .map(|(_, c)| c.norm_sqr())
        .sum::<f64>()
        / n as f64
}

fn ratio_db(e_in: f64, e_out: f64) -> Result<f64> {
    if !(e_in > 0.0) {
        return Err(Error::contract("input signal has no energy"));
    }
    if e_out == 0.0 {
        return Ok(SUPPRESSION_CAP_DB);
    }
    Ok((10.0 * (e_in / e_out).log10()).min(SUPPRESSION_CAP_DB))
}

/// `10·log10(E_in / E_out)`; a silent output saturates at +100 dB.
pub fn suppression_db(input: &[f64], output: &[f64]) -> Result<f64> {
    if input.len() != output.len() {
        return Err(Error::contract("input and output differ in length"));
    }
    ratio_db(energy(input), energy(output))
}

/// Suppression measured inside `band` after discarding the separator's
/// latency head and an equal tail from both signals.
pub fn measured_suppression_db(
    input: &[f64],
    output: &[f64],
    sample_rate: u32,
    band: Option<Band>,
) -> Result<f64> {
    if input.len() != output.len() {
        return Err(Error::contract("input and output differ in length"));
    }
    if input.len() <= 2 * LATENCY {
        return Err(Error::contract(format!(
            "signals need more than {} samples to measure energy",
            2 * LATENCY
        )));
    }
    let range = LATENCY..input.len() - LATENCY;
    ratio_db(
        band_energy(&input[range.clone()], sample_rate, band),
        band_energy(&output[range], sample_rate, band),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        let x: Vec<f64> = (0..100).map(|n| (n as f64).sin()).collect();
        assert_eq!(suppression_db(&x, &x).unwrap(), 0.0);
        let tenth: Vec<f64> = x.iter().map(|v| v / 10.0).collect();
        assert!((suppression_db(&x, &tenth).unwrap() - 20.0).abs() < 1e-12);
        assert_eq!(suppression_db(&x, &[0.0; 100]).unwrap(), SUPPRESSION_CAP_DB);
        assert!(matches!(
            suppression_db(&[0.0; 4], &[1.0; 4]),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn scaling_law_holds_for_any_factor() {
        let x: Vec<f64> = (0..1000).map(|n| (n as f64 * 0.3).cos()).collect();
        for a in [0.1, 0.5, 2.0, 7.0] {
            let y: Vec<f64> = x.iter().map(|v| a * v).collect();
            assert!((suppression_db(&x, &y).unwrap() + 20.0 * f64::log10(a)).abs() < 1e-9);
        }
    }

    #[test]
    fn band_energy_isolates_tones() {
        let fs = 16_000;
        let n = 16_000;
        let tone = |f: f64| {
            (0..n).map(move |i| (2.0 * std::f64::consts::PI * f * i as f64 / 16_000.0).sin())
        };
        let x: Vec<f64> = tone(1000.0).zip(tone(3000.0)).map(|(a, b)| a + b).collect();
        let inside = band_energy(&x, fs, Some(Band::default()));
        assert!((inside - n as f64 / 2.0).abs() < 1e-6 * n as f64);
        let all = band_energy(
            &x,
            fs,
            Some(Band {
                lo_hz: 0.0,
                hi_hz: 8000.0,
            }),
        );
        assert!((all - energy(&x)).abs() < 1e-9 * all);
    }
}
