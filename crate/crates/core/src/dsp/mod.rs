//! STFT framing, streaming engine, reconstruction loss and sample offsets.

pub mod loss;
pub mod offset;
pub mod stft;
pub mod stream;
pub mod xcorr;

pub use loss::stft_loss;
pub use offset::{apply_sample_offset, DEFAULT_MAX_OFFSET};
pub use stft::{istft, stft, Spectrogram, Stft, StftConfig, WindowKind};
pub use stream::{
    process_aligned, process_offline, FrameProcessor, IdentityProcessor, StreamingSession,
};
pub use xcorr::estimate_delay;
