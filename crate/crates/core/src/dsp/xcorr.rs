use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

const UPSAMPLE: usize = 32;

/// Sub-sample lag `tau` (in samples, |tau| <= `max_lag`) maximising the
/// cross-correlation, so that `a(t) ≈ b(t - tau)`.
///
/// The cross-spectrum is zero-padded for band-limited interpolation of the
/// correlation, then the peak is refined with a parabola.
pub fn estimate_delay(a: &[f64], b: &[f64], max_lag: usize) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::degenerate("empty signal in delay estimation"));
    }
    let n = (a.len() + b.len()).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let mut fa = vec![Complex64::new(0.0, 0.0); n];
    let mut fb = vec![Complex64::new(0.0, 0.0); n];
    for (d, &v) in fa.iter_mut().zip(a) {
        d.re = v;
    }
    for (d, &v) in fb.iter_mut().zip(b) {
        d.re = v;
    }
    fwd.process(&mut fa);
    fwd.process(&mut fb);

    let big = n * UPSAMPLE;
    let mut spec = vec![Complex64::new(0.0, 0.0); big];
    let half = n / 2;
    for k in 0..n {
        let c = fa[k] * fb[k].conj();
        if k < half {
            spec[k] = c;
        } else if k == half {
            spec[k] = c * 0.5;
            spec[big - half] = c * 0.5;
        } else {
            spec[big - n + k] = c;
        }
    }
    planner.plan_fft_inverse(big).process(&mut spec);

    let max_idx = (max_lag * UPSAMPLE) as i64;
    let at = |lag: i64| -> f64 { spec[lag.rem_euclid(big as i64) as usize].re };
    let mut best = 0i64;
    let mut best_val = f64::NEG_INFINITY;
    for lag in -max_idx..=max_idx {
        let v = at(lag);
        if v > best_val {
            best_val = v;
            best = lag;
        }
    }
    if !(best_val > 0.0) {
        return Err(Error::degenerate("signals are uncorrelated"));
    }
    let (l, c, r) = (at(best - 1), best_val, at(best + 1));
    let denom = l - 2.0 * c + r;
    let frac = if denom.abs() > 0.0 {
        0.5 * (l - r) / denom
    } else {
        0.0
    };
    Ok((best as f64 + frac) / UPSAMPLE as f64)
}
