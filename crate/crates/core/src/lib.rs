//! Spatial separation workbench for two-microphone arrays.
//!
//! The pipeline runs from image-source room simulation with angular-region
//! source placement, through two-channel mixture synthesis, to a steerable
//! delay-contrast mask separator, a multichannel Wiener filter baseline and
//! the evaluation benches (BSS-SDR, energy suppression, directivity).

// Checks are written as `!(x > 0.0)` on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod config;
pub mod dataset;
pub mod dsp;
pub mod error;
pub mod fracdelay;
pub mod geometry;
pub mod metrics;
pub mod rir;
pub mod separator;
pub mod signals;
pub mod stage;
pub mod synth;
pub mod wav;

pub use error::{Error, Result};
