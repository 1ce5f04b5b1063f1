//! Signal-to-distortion ratio under an allowed FIR distortion filter.
//!
//! The estimate is projected onto the span of the reference delayed by
//! `0..taps` samples (full linear convolution, estimate zero-padded), which
//! makes the normal equations Toeplitz in the reference autocorrelation.

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

pub const SDR_CAP_DB: f64 = 100.0;
pub const DEFAULT_FILTER_TAPS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdrOutcome {
    pub sdr_db: f64,
    /// Hit the ±100 dB cap.
    pub saturated: bool,
    /// The normal equations needed diagonal loading.
    pub regularized: bool,
}

fn spectrum(x: &[f64], n: usize, planner: &mut FftPlanner<f64>) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(n, Complex64::new(0.0, 0.0));
    planner.plan_fft_forward(n).process(&mut buf);
    buf
}

fn inverse(mut buf: Vec<Complex64>, planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let n = buf.len();
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

pub fn bss_sdr(estimate: &[f64], reference: &[f64], filter_taps: usize) -> Result<f64> {
    Ok(bss_sdr_detailed(estimate, reference, filter_taps)?.sdr_db)
}

pub fn bss_sdr_detailed(
    estimate: &[f64],
    reference: &[f64],
    filter_taps: usize,
) -> Result<SdrOutcome> {
    if estimate.len() != reference.len() {
        return Err(Error::contract(format!(
            "estimate has {} samples, reference {}",
            estimate.len(),
            reference.len()
        )));
    }
    if filter_taps == 0 {
        return Err(Error::config("distortion filter needs at least one tap"));
    }
    let ref_energy: f64 = reference.iter().map(|v| v * v).sum();
    if !(ref_energy > 0.0) {
        return Err(Error::contract("reference signal is silent"));
    }
    let n = reference.len();
    let taps = filter_taps;
    let full = n + taps - 1;
    let nfft = (n + full).next_power_of_two();
    let mut planner = FftPlanner::new();
    let r = spectrum(reference, nfft, &mut planner);
    let e = spectrum(estimate, nfft, &mut planner);

    // autocorr[l] = Σ ref[t] ref[t + l], cross[l] = Σ ref[t] est[t + l]
    let autocorr = inverse(
        r.iter().map(|c| c.norm_sqr().into()).collect(),
        &mut planner,
    );
    let cross = inverse(
        r.iter().zip(&e).map(|(a, b)| a.conj() * b).collect(),
        &mut planner,
    );

    let gram = DMatrix::from_fn(taps, taps, |i, j| autocorr[i.abs_diff(j)]);
    let rhs = DVector::from_fn(taps, |i, _| cross[i]);
    let (coeffs, regularized) = match gram.clone().cholesky() {
        Some(ch) => (ch.solve(&rhs), false),
        None => {
            let load = 1e-10 * autocorr[0];
            let loaded = gram + DMatrix::identity(taps, taps) * load;
            let ch = loaded.cholesky().ok_or_else(|| {
                Error::Numerical(
                    "distortion-filter normal equations are singular after loading".into(),
                )
            })?;
            (ch.solve(&rhs), true)
        }
    };

    let a_spec = spectrum(coeffs.as_slice(), nfft, &mut planner);
    let target = inverse(
        r.iter().zip(&a_spec).map(|(x, y)| x * y).collect(),
        &mut planner,
    );
    let mut target_energy = 0.0;
    let mut residual_energy = 0.0;
    for (t, &tp) in target.iter().take(full).enumerate() {
        let est = estimate.get(t).copied().unwrap_or(0.0);
        target_energy += tp * tp;
        residual_energy += (est - tp) * (est - tp);
    }
    let raw = if residual_energy == 0.0 {
        f64::INFINITY
    } else if target_energy == 0.0 {
        f64::NEG_INFINITY
    } else {
        10.0 * (target_energy / residual_energy).log10()
    };
    let saturated = raw.abs() >= SDR_CAP_DB;
    Ok(SdrOutcome {
        sdr_db: raw.clamp(-SDR_CAP_DB, SDR_CAP_DB),
        saturated,
        regularized,
    })
}
