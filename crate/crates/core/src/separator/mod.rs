//! Two-microphone separators behind a common causal interface.
//!
//! A separator takes the two microphone waveforms and returns one waveform
//! aligned with microphone 0. Every implementation also exposes a streaming
//! form with a fixed latency of one analysis window (320 samples at 16 kHz).

mod ipd;
mod mcwf;

use std::collections::VecDeque;

pub use ipd::{
    ipd_mask, ipd_separate, steer, IpdProcessor, IpdSeparator, MaskFrame, SeparatorConfig,
    NOMINAL_SPACING,
};
pub use mcwf::{estimate_covariance, mcwf_separate, mcwf_weights, CovarianceSet, McwfSeparator};

use crate::dsp::{
    apply_sample_offset, process_aligned, FrameProcessor, StftConfig, StreamingSession,
    DEFAULT_MAX_OFFSET,
};
use crate::error::{Error, Result};

/// Latency of every separator in samples.
pub const LATENCY: usize = StftConfig::ANALYSIS.window_size;

/// Incremental separation of an unbounded two-channel stream.
pub trait SeparatorStream: Send {
    /// Consumes one chunk per channel and returns as many output samples,
    /// delayed by [`SeparatorStream::latency`].
    fn push(&mut self, y0: &[f64], y1: &[f64]) -> Result<Vec<f64>>;

    fn latency(&self) -> usize;
}

pub trait Separator: Send + Sync {
    fn name(&self) -> String;

    /// Fresh streaming state.
    fn stream(&self) -> Result<Box<dyn SeparatorStream>>;

    /// The same separator with microphone 1 delayed by a further `offset`
    /// samples, which rotates its directivity pattern.
    fn steered(&self, offset: f64) -> Result<Box<dyn Separator + '_>>;

    /// Offline separation with the latency removed: the output has the input
    /// length and is aligned with it.
    fn separate(&self, y0: &[f64], y1: &[f64]) -> Result<Vec<f64>> {
        check_pair(y0, y1)?;
        separate_streaming(self, y0, y1, y0.len().max(1))
    }
}

pub(crate) fn check_pair(y0: &[f64], y1: &[f64]) -> Result<()> {
    if y0.len() != y1.len() {
        return Err(Error::contract(format!(
            "channel lengths differ ({} vs {})",
            y0.len(),
            y1.len()
        )));
    }
    Ok(())
}

/// Runs `separator` through its streaming form in chunks of `chunk` samples,
/// flushes the latency with zeros and drops the head, so the result lines up
/// with the input.
pub fn separate_streaming<S: Separator + ?Sized>(
    separator: &S,
    y0: &[f64],
    y1: &[f64],
    chunk: usize,
) -> Result<Vec<f64>> {
    check_pair(y0, y1)?;
    let mut stream = separator.stream()?;
    let latency = stream.latency();
    let chunk = chunk.max(1);
    let mut out = Vec::with_capacity(y0.len() + latency);
    for (a, b) in y0.chunks(chunk).zip(y1.chunks(chunk)) {
        out.extend(stream.push(a, b)?);
    }
    let zeros = vec![0.0; latency];
    out.extend(stream.push(&zeros, &zeros)?);
    out.drain(..latency);
    Ok(out)
}

/// Wraps a frame processor as a stream.
struct FrameStream(StreamingSession);

impl SeparatorStream for FrameStream {
    fn push(&mut self, y0: &[f64], y1: &[f64]) -> Result<Vec<f64>> {
        check_pair(y0, y1)?;
        self.0.push(&[y0, y1])
    }

    fn latency(&self) -> usize {
        self.0.latency()
    }
}

pub(crate) fn frame_stream(
    config: StftConfig,
    p: Box<dyn FrameProcessor>,
) -> Result<Box<dyn SeparatorStream>> {
    Ok(Box::new(FrameStream(StreamingSession::new(config, p)?)))
}

pub(crate) fn frame_separate(
    config: StftConfig,
    p: Box<dyn FrameProcessor>,
    y0: &[f64],
    y1: &[f64],
) -> Result<Vec<f64>> {
    check_pair(y0, y1)?;
    process_aligned(&[y0, y1], config, p)
}

/// Passes microphone 0 through a pure delay line of [`LATENCY`] samples.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentitySeparator;

struct DelayLine {
    buf: VecDeque<f64>,
}

impl SeparatorStream for DelayLine {
    fn push(&mut self, y0: &[f64], y1: &[f64]) -> Result<Vec<f64>> {
        check_pair(y0, y1)?;
        let mut out = Vec::with_capacity(y0.len());
        for &x in y0 {
            self.buf.push_back(x);
            out.push(self.buf.pop_front().unwrap_or(0.0));
        }
        Ok(out)
    }

    fn latency(&self) -> usize {
        LATENCY
    }
}

impl Separator for IdentitySeparator {
    fn name(&self) -> String {
        "identity".into()
    }

    fn stream(&self) -> Result<Box<dyn SeparatorStream>> {
        Ok(Box::new(DelayLine {
            buf: std::iter::repeat_n(0.0, LATENCY).collect(),
        }))
    }

    fn steered(&self, offset: f64) -> Result<Box<dyn Separator + '_>> {
        InputDelay::boxed(self, offset)
    }

    fn separate(&self, y0: &[f64], y1: &[f64]) -> Result<Vec<f64>> {
        check_pair(y0, y1)?;
        Ok(y0.to_vec())
    }
}

/// Steers any separator by delaying its microphone-1 input in the time
/// domain. Offline only: negative and fractional delays need future samples.
pub struct InputDelay<'a> {
    pub inner: &'a dyn Separator,
    pub offset: f64,
    pub max_offset: f64,
}

impl<'a> InputDelay<'a> {
    pub fn boxed(inner: &'a dyn Separator, offset: f64) -> Result<Box<dyn Separator + 'a>> {
        if !offset.is_finite() || offset.abs() > DEFAULT_MAX_OFFSET {
            return Err(Error::contract(format!(
                "steering offset {offset} outside ±{DEFAULT_MAX_OFFSET}"
            )));
        }
        Ok(Box::new(InputDelay {
            inner,
            offset,
            max_offset: DEFAULT_MAX_OFFSET,
        }))
    }
}

impl Separator for InputDelay<'_> {
    fn name(&self) -> String {
        format!("{}(offset={:+})", self.inner.name(), self.offset)
    }

    fn stream(&self) -> Result<Box<dyn SeparatorStream>> {
        if self.offset == 0.0 {
            return self.inner.stream();
        }
        Err(Error::contract(
            "input-delay steering is only available offline",
        ))
    }

    fn steered(&self, offset: f64) -> Result<Box<dyn Separator + '_>> {
        InputDelay::boxed(self, offset)
    }

    fn separate(&self, y0: &[f64], y1: &[f64]) -> Result<Vec<f64>> {
        check_pair(y0, y1)?;
        let shifted = apply_sample_offset(y1, self.offset, self.max_offset)?;
        self.inner.separate(y0, &shifted)
    }
}
