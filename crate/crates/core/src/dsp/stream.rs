//! Causal frame-by-frame processing at a fixed latency of one window.
//!
//! The input is preceded by `window - hop` virtual zeros so every real sample
//! is covered by a full set of overlapping frames. Output sample `m` is the
//! processed input sample `m - window`; the first `window` outputs are zero.
//! [`process_offline`] runs the identical arithmetic over a whole buffer, so
//! streamed and offline results are bit-identical regardless of chunking.

use std::collections::VecDeque;

use rustfft::num_complex::Complex64;

use super::stft::{Stft, StftConfig};
use crate::error::{Error, Result};

/// Per-frame spectral processor. Frames arrive strictly in order.
pub trait FrameProcessor: Send {
    fn num_channels(&self) -> usize;

    /// Future frames the processor needs before producing frame `t`.
    /// Anything other than zero is rejected by the streaming engine.
    fn lookahead_frames(&self) -> usize {
        0
    }

    /// Writes the output spectrum for the current frame into `output`.
    fn process(&mut self, inputs: &[&[Complex64]], output: &mut [Complex64]);
}

/// Passes channel 0 through unchanged.
#[derive(Debug, Clone, Default)]
pub struct IdentityProcessor {
    pub channels: usize,
}

impl FrameProcessor for IdentityProcessor {
    fn num_channels(&self) -> usize {
        self.channels.max(1)
    }

    fn process(&mut self, inputs: &[&[Complex64]], output: &mut [Complex64]) {
        output.copy_from_slice(inputs[0]);
    }
}

fn check_processor(p: &dyn FrameProcessor) -> Result<()> {
    if p.lookahead_frames() > 0 {
        return Err(Error::contract(format!(
            "processor requests {} future frame(s); streaming is strictly causal",
            p.lookahead_frames()
        )));
    }
    if p.num_channels() == 0 {
        return Err(Error::contract("processor takes no input channels"));
    }
    Ok(())
}

pub struct StreamingSession {
    stft: Stft,
    processor: Box<dyn FrameProcessor>,
    history: Vec<VecDeque<f64>>,
    /// Overlap-add accumulator; front element is virtual index `acc_base`.
    acc: VecDeque<f64>,
    acc_base: usize,
    /// Virtual samples received (including the zero prefix).
    virtual_len: usize,
    received: usize,
    spectra: Vec<Vec<Complex64>>,
    out_bins: Vec<Complex64>,
    frame_buf: Vec<f64>,
    synth_buf: Vec<f64>,
}

impl std::fmt::Debug for StreamingSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StreamingSession")
            .field("config", self.stft.config())
            .field("received", &self.received)
            .finish()
    }
}

impl StreamingSession {
    pub fn new(config: StftConfig, processor: Box<dyn FrameProcessor>) -> Result<Self> {
        check_processor(processor.as_ref())?;
        let stft = Stft::new(config)?;
        let w = config.window_size;
        let prefix = w - config.hop_size;
        let history = (0..processor.num_channels())
            .map(|_| {
                let mut d = VecDeque::with_capacity(w);
                d.extend(std::iter::repeat_n(0.0, prefix));
                d
            })
            .collect();
        let channels = processor.num_channels();
        Ok(StreamingSession {
            stft,
            processor,
            history,
            acc: VecDeque::new(),
            acc_base: 0,
            virtual_len: prefix,
            received: 0,
            spectra: vec![Vec::new(); channels],
            out_bins: vec![Complex64::new(0.0, 0.0); config.num_bins()],
            frame_buf: vec![0.0; w],
            synth_buf: vec![0.0; w],
        })
    }

    /// Algorithmic latency in samples.
    pub fn latency(&self) -> usize {
        self.stft.config().window_size
    }

    pub fn num_channels(&self) -> usize {
        self.history.len()
    }

    /// Pushes one chunk (equal length per channel) and returns as many
    /// output samples.
    pub fn push(&mut self, inputs: &[&[f64]]) -> Result<Vec<f64>> {
        if inputs.len() != self.history.len() {
            return Err(Error::contract(format!(
                "expected {} channels, got {}",
                self.history.len(),
                inputs.len()
            )));
        }
        let n = inputs[0].len();
        if inputs.iter().any(|c| c.len() != n) {
            return Err(Error::contract("channel chunks differ in length"));
        }
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            for (h, ch) in self.history.iter_mut().zip(inputs) {
                h.push_back(ch[i]);
            }
            out.push(self.advance());
        }
        Ok(out)
    }

    fn advance(&mut self) -> f64 {
        let cfg = *self.stft.config();
        let (w, hop) = (cfg.window_size, cfg.hop_size);
        self.virtual_len += 1;
        let m = self.received;
        self.received += 1;

        if self.virtual_len >= w && (self.virtual_len - w).is_multiple_of(hop) {
            let start = self.virtual_len - w;
            for (c, h) in self.history.iter_mut().enumerate() {
                while h.len() > w {
                    h.pop_front();
                }
                for (dst, src) in self.frame_buf.iter_mut().zip(h.iter()) {
                    *dst = *src;
                }
                self.stft
                    .analyze_frame(&self.frame_buf, &mut self.spectra[c]);
            }
            let views: Vec<&[Complex64]> = self.spectra.iter().map(Vec::as_slice).collect();
            self.processor.process(&views, &mut self.out_bins);
            self.stft
                .synthesize_frame(&self.out_bins, &mut self.synth_buf);
            while self.acc_base + self.acc.len() < start + w {
                self.acc.push_back(0.0);
            }
            for (i, v) in self.synth_buf.iter().enumerate() {
                self.acc[start + i - self.acc_base] += v;
            }
        }

        if m < w {
            return 0.0;
        }
        let j = m - hop;
        while self.acc_base < j {
            self.acc.pop_front();
            self.acc_base += 1;
        }
        self.acc.front().copied().unwrap_or(0.0) * self.stft.synthesis_gain()
    }
}

/// Offline counterpart of [`StreamingSession`]: returns the same delayed
/// output stream, one sample per input sample.
pub fn process_offline(
    inputs: &[&[f64]],
    config: StftConfig,
    mut processor: Box<dyn FrameProcessor>,
) -> Result<Vec<f64>> {
    check_processor(processor.as_ref())?;
    if inputs.len() != processor.num_channels() {
        return Err(Error::contract(format!(
            "expected {} channels, got {}",
            processor.num_channels(),
            inputs.len()
        )));
    }
    let n = inputs[0].len();
    if inputs.iter().any(|c| c.len() != n) {
        return Err(Error::contract("channels differ in length"));
    }
    let stft = Stft::new(config)?;
    let (w, hop) = (config.window_size, config.hop_size);
    let prefix = w - hop;
    let padded: Vec<Vec<f64>> = inputs
        .iter()
        .map(|c| {
            std::iter::repeat_n(0.0, prefix)
                .chain(c.iter().copied())
                .collect()
        })
        .collect();
    let vlen = prefix + n;
    let mut acc = vec![0.0; vlen];
    let mut spectra = vec![Vec::new(); inputs.len()];
    let mut out_bins = vec![Complex64::new(0.0, 0.0); config.num_bins()];
    let mut synth = vec![0.0; w];
    let mut start = 0;
    while start + w <= vlen {
        for (c, p) in padded.iter().enumerate() {
            stft.analyze_frame(&p[start..start + w], &mut spectra[c]);
        }
        let views: Vec<&[Complex64]> = spectra.iter().map(Vec::as_slice).collect();
        processor.process(&views, &mut out_bins);
        stft.synthesize_frame(&out_bins, &mut synth);
        for (a, v) in acc[start..start + w].iter_mut().zip(&synth) {
            *a += v;
        }
        start += hop;
    }
    let gain = stft.synthesis_gain();
    Ok((0..n)
        .map(|m| if m < w { 0.0 } else { acc[m - hop] * gain })
        .collect())
}

/// Runs `processor` offline and removes the latency: output has the input
/// length and is aligned with it.
pub fn process_aligned(
    inputs: &[&[f64]],
    config: StftConfig,
    processor: Box<dyn FrameProcessor>,
) -> Result<Vec<f64>> {
    let w = config.window_size;
    let padded: Vec<Vec<f64>> = inputs
        .iter()
        .map(|c| {
            c.iter()
                .copied()
                .chain(std::iter::repeat_n(0.0, w))
                .collect()
        })
        .collect();
    let views: Vec<&[f64]> = padded.iter().map(Vec::as_slice).collect();
    let mut out = process_offline(&views, config, processor)?;
    out.drain(..w);
    Ok(out)
}
