//! Voice memo capture, noise reduction, WAV persistence and association.

mod associate;
mod clip;
mod gate;
mod record;
mod wav;

use thiserror::Error;

pub use associate::{associate_memo, CaptureContext, DEFAULT_ASSOCIATION_WINDOW_S};
pub use clip::{AudioClip, MemoDraft, MemoMeta, VoiceMemo, SAMPLE_RATE};
pub use gate::{nearest_rank, noise_gate, rms, GatePolicy};
pub use record::{record_memo, CaptureEvent};
pub use wav::{read_wav, write_wav};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WavError {
    #[error("malformed wav: {0}")]
    Malformed(String),
    #[error("unsupported wav: {0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AudioError {
    #[error("audio clip has no samples")]
    EmptyAudio,
    #[error("association window must be positive, got {0}")]
    InvalidWindow(f64),
    #[error(transparent)]
    Wav(#[from] WavError),
}
