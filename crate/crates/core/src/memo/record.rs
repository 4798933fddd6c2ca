use super::clip::{AudioClip, SAMPLE_RATE};
use super::gate::{noise_gate, GatePolicy};
use super::AudioError;

/// One item from a microphone-like sample feed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CaptureEvent {
    Samples(Vec<i16>),
    Stop,
}

/// Capture until a stop event, the end of the feed, or `max_duration_s`,
/// then noise-gate the result.
pub fn record_memo<I>(source: I, max_duration_s: f64, policy: &GatePolicy) -> Result<AudioClip, AudioError>
where
    I: IntoIterator<Item = CaptureEvent>,
{
    let limit = (max_duration_s.max(0.0) * SAMPLE_RATE as f64).floor() as usize;
    let mut samples = Vec::new();
    for event in source {
        match event {
            CaptureEvent::Stop => break,
            CaptureEvent::Samples(chunk) => {
                let room = limit - samples.len();
                samples.extend_from_slice(&chunk[..chunk.len().min(room)]);
                if samples.len() >= limit {
                    break;
                }
            }
        }
    }
    if samples.is_empty() {
        return Err(AudioError::EmptyAudio);
    }
    noise_gate(&AudioClip::new(samples), policy)
}
