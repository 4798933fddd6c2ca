//! Noise reduction: a first-order high-pass followed by a frame RMS gate.

use serde::{Deserialize, Serialize};

use super::clip::{AudioClip, SAMPLE_RATE};
use super::AudioError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatePolicy {
    pub highpass_hz: f64,
    /// Frame length in samples (20 ms at 16 kHz).
    pub frame: usize,
    /// Percentile of frame RMS taken as the noise floor.
    pub floor_percentile: f64,
    /// Frames quieter than `open_ratio * floor` are attenuated.
    pub open_ratio: f64,
    pub attenuation: f64,
}

impl Default for GatePolicy {
    fn default() -> Self {
        Self {
            highpass_hz: 100.0,
            frame: 320,
            floor_percentile: 10.0,
            open_ratio: 2.0,
            attenuation: 0.1,
        }
    }
}

/// High-pass at `policy.highpass_hz`, then attenuate quiet frames.
///
/// The noise floor is the nearest-rank `floor_percentile` of frame RMS.
/// Frames below `open_ratio * floor` are scaled by `attenuation`, but only
/// when the clip has a louder part at all: if the 90th-percentile frame is
/// itself under the gate threshold the clip is uniformly loud (or uniformly
/// quiet) and passes through ungated.
pub fn noise_gate(clip: &AudioClip, policy: &GatePolicy) -> Result<AudioClip, AudioError> {
    clip.require_samples()?;
    let filtered = high_pass(clip.samples(), policy.highpass_hz, SAMPLE_RATE as f64);

    let frame = policy.frame.max(1);
    let rms: Vec<f64> = filtered.chunks(frame).map(frame_rms).collect();
    let floor = nearest_rank(&rms, policy.floor_percentile);
    let threshold = policy.open_ratio * floor;
    let loud = nearest_rank(&rms, 90.0);
    let gating = loud >= threshold;

    let mut out = Vec::with_capacity(filtered.len());
    for (chunk, &level) in filtered.chunks(frame).zip(&rms) {
        let gain = if gating && level < threshold {
            policy.attenuation
        } else {
            1.0
        };
        out.extend(chunk.iter().map(|&s| to_i16(s * gain)));
    }
    Ok(AudioClip::new(out))
}

/// `y[n] = a * (y[n-1] + x[n] - x[n-1])`, `a = RC / (RC + dt)`, starting at
/// rest on the first sample so a DC offset does not produce a click.
fn high_pass(x: &[i16], cutoff_hz: f64, rate: f64) -> Vec<f64> {
    let rc = 1.0 / (2.0 * std::f64::consts::PI * cutoff_hz);
    let dt = 1.0 / rate;
    let a = rc / (rc + dt);
    let mut out = Vec::with_capacity(x.len());
    let mut prev_x = x.first().copied().unwrap_or(0) as f64;
    let mut prev_y = 0.0;
    for &s in x {
        let s = s as f64;
        let y = a * (prev_y + s - prev_x);
        out.push(y);
        prev_x = s;
        prev_y = y;
    }
    out
}

fn frame_rms(frame: &[f64]) -> f64 {
    (frame.iter().map(|s| s * s).sum::<f64>() / frame.len() as f64).sqrt()
}

/// Nearest-rank percentile (`p` in (0, 100]) of unsorted values.
pub fn nearest_rank(values: &[f64], p: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

fn to_i16(v: f64) -> i16 {
    v.round().clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

/// RMS of integer samples.
pub fn rms(samples: &[i16]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    (samples.iter().map(|&s| (s as f64).powi(2)).sum::<f64>() / samples.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    const FULL_SCALE: f64 = 32767.0;

    fn db(ratio: f64) -> f64 {
        20.0 * ratio.log10()
    }

    fn tone(n: usize, amp: f64, phase0: usize) -> impl Iterator<Item = f64> {
        (0..n).map(move |i| {
            amp * (2.0 * std::f64::consts::PI * 440.0 * (i + phase0) as f64 / 16000.0).sin()
        })
    }

    #[test]
    fn silence_stays_silent() {
        let out = noise_gate(&AudioClip::new(vec![0; 1000]), &GatePolicy::default()).unwrap();
        assert!(out.samples().iter().all(|&s| s == 0));
    }

    #[test]
    fn empty_clip_is_rejected() {
        assert!(matches!(
            noise_gate(&AudioClip::new(vec![]), &GatePolicy::default()),
            Err(AudioError::EmptyAudio)
        ));
    }

    #[test]
    fn steady_tone_keeps_its_level() {
        // -6 dBFS peak amplitude.
        let amp = FULL_SCALE * 10f64.powf(-6.0 / 20.0);
        let input: Vec<i16> = tone(16000, amp, 0).map(to_i16).collect();
        let out = noise_gate(&AudioClip::new(input.clone()), &GatePolicy::default()).unwrap();
        assert_eq!(out.len(), input.len());
        let change = db(rms(out.samples()) / rms(&input));
        assert!(change.abs() < 1.0, "level change {change} dB");
    }

    #[test]
    fn nearest_rank_examples() {
        let v = [5.0, 1.0, 4.0, 2.0, 3.0];
        assert_eq!(nearest_rank(&v, 10.0), 1.0);
        assert_eq!(nearest_rank(&v, 50.0), 3.0);
        assert_eq!(nearest_rank(&v, 100.0), 5.0);
        assert_eq!(nearest_rank(&[7.0], 99.0), 7.0);
    }

    #[test]
    fn short_partial_frames_are_handled() {
        let mut rng = SplitMix64::new(3);
        let input: Vec<i16> = (0..333).map(|_| rng.below(2000) as i16 - 1000).collect();
        let out = noise_gate(&AudioClip::new(input), &GatePolicy::default()).unwrap();
        assert_eq!(out.len(), 333);
    }
}
