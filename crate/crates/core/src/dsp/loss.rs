use super::stft::{Stft, StftConfig};
use crate::error::{Error, Result};

/// Floor inside the log-magnitude term.
pub const LOG_EPSILON: f64 = 1e-7;

/// Single-scale STFT reconstruction loss: mean absolute magnitude difference
/// plus mean absolute log-magnitude difference, both over every bin of every
/// frame. Symmetric, non-negative, zero exactly when the magnitude
/// spectrograms agree.
pub fn stft_loss(estimate: &[f64], reference: &[f64], config: StftConfig) -> Result<f64> {
    if estimate.len() != reference.len() {
        return Err(Error::contract(format!(
            "loss inputs differ in length ({} vs {})",
            estimate.len(),
            reference.len()
        )));
    }
    let engine = Stft::new(config)?;
    let a = engine.stft(estimate)?;
    let b = engine.stft(reference)?;
    let mut lin = 0.0;
    let mut log = 0.0;
    let mut count = 0usize;
    for (fa, fb) in a.frames.iter().zip(&b.frames) {
        for (x, y) in fa.iter().zip(fb) {
            let (mx, my) = (x.norm(), y.norm());
            lin += (mx - my).abs();
            log += ((mx + LOG_EPSILON).ln() - (my + LOG_EPSILON).ln()).abs();
            count += 1;
        }
    }
    Ok((lin + log) / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rustfft::num_complex::Complex64;
    use std::f64::consts::PI;

    fn noise(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let rms = (x.iter().map(|v| v * v).sum::<f64>() / len as f64).sqrt();
        x.into_iter().map(|v| v / rms).collect()
    }

    #[test]
    fn identical_and_negated_inputs_have_zero_loss() {
        let x = noise(8000, 1);
        assert_eq!(stft_loss(&x, &x, StftConfig::LOSS).unwrap(), 0.0);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!(stft_loss(&x, &neg, StftConfig::LOSS).unwrap() < 1e-12);
    }

    #[test]
    fn loss_against_silence_matches_direct_summation() {
        // Oracle: naive DFT per frame, summed bin by bin.
        let x = noise(4096, 2);
        let zero = vec![0.0; x.len()];
        let got = stft_loss(&x, &zero, StftConfig::LOSS).unwrap();
        let (w, hop) = (1024usize, 256usize);
        let win: Vec<f64> = (0..w)
            .map(|n| 0.5 * (1.0 - (2.0 * PI * n as f64 / w as f64).cos()))
            .collect();
        let mut total = 0.0;
        let mut count = 0;
        let mut start = 0;
        while start + w <= x.len() {
            for k in 0..=w / 2 {
                let mut acc = Complex64::new(0.0, 0.0);
                for n in 0..w {
                    let ph = -2.0 * PI * (k * n) as f64 / w as f64;
                    acc += Complex64::from_polar(x[start + n] * win[n], ph);
                }
                let m = acc.norm();
                total += m + ((m + LOG_EPSILON).ln() - LOG_EPSILON.ln()).abs();
                count += 1;
            }
            start += hop;
        }
        let oracle = total / count as f64;
        assert!(got > 0.0 && got.is_finite());
        assert!((got - oracle).abs() < 1e-9 * oracle, "{got} vs {oracle}");
    }

    #[test]
    fn symmetric_and_length_checked() {
        let a = noise(3000, 3);
        let b = noise(3000, 4);
        let ab = stft_loss(&a, &b, StftConfig::LOSS).unwrap();
        let ba = stft_loss(&b, &a, StftConfig::LOSS).unwrap();
        assert_eq!(ab, ba);
        assert!(matches!(
            stft_loss(&a, &b[..2999], StftConfig::LOSS),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn scaling_toward_reference_decreases_loss() {
        let x = noise(4000, 5);
        let mut last = f64::INFINITY;
        for g in [0.1, 0.3, 0.6, 0.9, 1.0] {
            let est: Vec<f64> = x.iter().map(|v| g * v).collect();
            let l = stft_loss(&est, &x, StftConfig::LOSS).unwrap();
            assert!(l < last, "gain {g}: {l} >= {last}");
            last = l;
        }
    }
}
