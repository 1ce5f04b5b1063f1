//! Hann-windowed sinc fractional delay kernel.
//!
//! Every sub-sample delay in the crate goes through this kernel: image sources
//! in the RIR simulator, anechoic reductions and steering offsets.

use std::f64::consts::PI;

/// Taps on each side of the kernel centre.
pub const HALF_TAPS: usize = 40;
pub const TAPS: usize = 2 * HALF_TAPS + 1;

// Window half-width, one past the outermost tap so that tap keeps nonzero weight.
const WINDOW_HALF_WIDTH: f64 = HALF_TAPS as f64 + 1.0;

/// Kernel for a delay of `delay` samples: returns the index of the first tap
/// and the tap values. Integer delays produce an exact unit impulse.
pub fn kernel(delay: f64) -> (i64, [f64; TAPS]) {
    let centre = delay.round();
    let frac = delay - centre;
    let first = centre as i64 - HALF_TAPS as i64;
    let mut taps = [0.0; TAPS];
    if frac == 0.0 {
        taps[HALF_TAPS] = 1.0;
        return (first, taps);
    }
    // sin(pi (m - frac)) = -(-1)^m sin(pi frac) keeps integer offsets exact.
    let s = (PI * frac).sin();
    // Window phase advances by a fixed step per tap; rotate instead of calling cos.
    let step = PI / WINDOW_HALF_WIDTH;
    let (step_sin, step_cos) = step.sin_cos();
    let (mut ph_sin, mut ph_cos) = (step * (-(HALF_TAPS as f64) - frac)).sin_cos();
    for (i, tap) in taps.iter_mut().enumerate() {
        let x = i as f64 - HALF_TAPS as f64 - frac;
        let sign = if (i + HALF_TAPS).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        let sinc = -sign * s / (PI * x);
        let window = 0.5 * (1.0 + ph_cos);
        *tap = sinc * window;
        let c = ph_cos * step_cos - ph_sin * step_sin;
        ph_sin = ph_sin * step_cos + ph_cos * step_sin;
        ph_cos = c;
    }
    (first, taps)
}

/// Accumulates `amplitude * kernel(delay)` into `buf`, discarding taps that
/// fall outside it.
pub fn add_delayed_impulse(buf: &mut [f64], delay: f64, amplitude: f64) {
    let (first, taps) = kernel(delay);
    let len = buf.len() as i64;
    for (i, tap) in taps.iter().enumerate() {
        let n = first + i as i64;
        if n >= 0 && n < len {
            buf[n as usize] += amplitude * tap;
        }
    }
}

/// Delays `signal` by `delay` samples (negative values advance it), keeping
/// the length. Samples shifted in from outside the signal are zero.
pub fn delay_signal(signal: &[f64], delay: f64) -> Vec<f64> {
    let n = signal.len();
    let mut out = vec![0.0; n];
    if delay == delay.round() {
        let shift = delay as i64;
        for (i, y) in out.iter_mut().enumerate() {
            let src = i as i64 - shift;
            if src >= 0 && (src as usize) < n {
                *y = signal[src as usize];
            }
        }
        return out;
    }
    let (first, taps) = kernel(delay);
    for (i, y) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (k, tap) in taps.iter().enumerate() {
            let src = i as i64 - (first + k as i64);
            if src >= 0 && (src as usize) < n {
                acc += tap * signal[src as usize];
            }
        }
        *y = acc;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_delay_is_exact_impulse() {
        let (first, taps) = kernel(12.0);
        assert_eq!(first, 12 - HALF_TAPS as i64);
        for (i, t) in taps.iter().enumerate() {
            assert_eq!(*t, if i == HALF_TAPS { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn half_sample_kernel_is_symmetric() {
        let (_, taps) = kernel(10.5);
        // Centre rounds to 11 (ties away from zero): taps 10 and 11 straddle 10.5.
        assert!((taps[HALF_TAPS] - taps[HALF_TAPS - 1]).abs() < 1e-15);
        assert!(taps[HALF_TAPS] > 0.6);
    }

    #[test]
    fn kernel_matches_direct_formula() {
        let delay = 7.3;
        let (first, taps) = kernel(delay);
        for (i, t) in taps.iter().enumerate() {
            let x = (first + i as i64) as f64 - delay;
            let sinc = (PI * x).sin() / (PI * x);
            let w = 0.5 * (1.0 + (PI * x / 41.0).cos());
            assert!((t - sinc * w).abs() < 1e-12);
        }
    }

    #[test]
    fn dc_gain_near_unity() {
        for delay in [3.1, 3.25, 3.5, 3.9] {
            let (_, taps) = kernel(delay);
            let sum: f64 = taps.iter().sum();
            assert!((sum - 1.0).abs() < 1e-2, "{delay}: {sum}");
        }
    }

    #[test]
    fn shift_round_trip_on_interior() {
        let x: Vec<f64> = (0..2000)
            .map(|i| (i as f64 * 0.05).sin() + 0.3 * (i as f64 * 0.31).cos())
            .collect();
        let y = delay_signal(&delay_signal(&x, 2.4), -2.4);
        for i in 200..1800 {
            assert!((x[i] - y[i]).abs() < 1e-3, "{i}: {} vs {}", x[i], y[i]);
        }
        let z = delay_signal(&delay_signal(&x, 3.0), -3.0);
        assert_eq!(&x[3..1997], &z[3..1997]);
    }
}
