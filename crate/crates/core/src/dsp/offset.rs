use crate::error::{Error, Result};
use crate::fracdelay;

/// Largest steering offset accepted by default, in samples.
pub const DEFAULT_MAX_OFFSET: f64 = 8.0;

/// Delays `waveform` by `offset` samples (negative advances it). Integer
/// offsets shift with zero fill; fractional ones use the windowed-sinc kernel.
pub fn apply_sample_offset(waveform: &[f64], offset: f64, max_offset: f64) -> Result<Vec<f64>> {
    if !offset.is_finite() || offset.abs() > max_offset {
        return Err(Error::contract(format!(
            "sample offset {offset} outside the allowed range ±{max_offset}"
        )));
    }
    if offset == 0.0 {
        return Ok(waveform.to_vec());
    }
    Ok(fracdelay::delay_signal(waveform, offset))
}
