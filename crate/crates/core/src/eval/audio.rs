//! Deterministic audio fixtures for the noise gate.

use std::ops::Range;

use crate::memo::{AudioClip, SAMPLE_RATE};
use crate::rng::SplitMix64;

pub const FULL_SCALE: f64 = 32767.0;

/// Peak amplitude for a level in dBFS.
pub fn dbfs(level_db: f64) -> f64 {
    FULL_SCALE * 10f64.powf(level_db / 20.0)
}

/// `n` samples of a sine at `freq` Hz with the given peak amplitude.
pub fn tone(n: usize, freq: f64, amplitude: f64) -> Vec<f64> {
    (0..n)
        .map(|i| amplitude * (2.0 * std::f64::consts::PI * freq * i as f64 / SAMPLE_RATE as f64).sin())
        .collect()
}

/// A burst fixture with the regions it was built from.
#[derive(Debug, Clone)]
pub struct BurstFixture {
    pub clip: AudioClip,
    pub tone_regions: Vec<Range<usize>>,
    pub silent_regions: Vec<Range<usize>>,
}

/// Alternating 0.3 s silence and 0.3 s 440 Hz bursts at -6 dBFS (four of
/// each, silence first), with white noise at -40 dBFS RMS over everything.
/// Bursts have 10 ms raised-cosine onsets and releases.
pub fn tone_bursts(seed: u64) -> BurstFixture {
    let segment = 4800;
    let fade = 160;
    let mut burst = tone(segment, 440.0, dbfs(-6.0));
    for i in 0..fade {
        let g = 0.5 - 0.5 * (std::f64::consts::PI * i as f64 / fade as f64).cos();
        burst[i] *= g;
        burst[segment - 1 - i] *= g;
    }
    // Uniform noise on [-a, a] has RMS a / sqrt(3).
    let noise_peak = FULL_SCALE * 10f64.powf(-40.0 / 20.0) * 3f64.sqrt();
    let mut rng = SplitMix64::new(seed);
    let mut samples = Vec::with_capacity(segment * 8);
    let mut tone_regions = Vec::new();
    let mut silent_regions = Vec::new();
    for k in 0..8 {
        let start = k * segment;
        let is_tone = k % 2 == 1;
        for &tone in &burst[..segment] {
            let signal = if is_tone { tone } else { 0.0 };
            let v = signal + rng.uniform(-noise_peak, noise_peak);
            samples.push(v.round().clamp(-32768.0, 32767.0) as i16);
        }
        if is_tone {
            tone_regions.push(start..start + segment);
        } else {
            silent_regions.push(start..start + segment);
        }
    }
    BurstFixture {
        clip: AudioClip::new(samples),
        tone_regions,
        silent_regions,
    }
}

/// RMS over the union of `regions`.
pub fn region_rms(samples: &[i16], regions: &[Range<usize>]) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for r in regions {
        for &s in &samples[r.clone()] {
            sum += (s as f64).powi(2);
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

/// Level change in dB from `before` to `after`.
pub fn db_change(before: f64, after: f64) -> f64 {
    20.0 * (after / before).log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memo::{noise_gate, rms, GatePolicy};

    #[test]
    fn fixture_levels() {
        let f = tone_bursts(1);
        assert_eq!(f.clip.len(), 8 * 4800);
        let noise = region_rms(f.clip.samples(), &f.silent_regions);
        assert!((db_change(FULL_SCALE, noise) + 40.0).abs() < 0.5);
    }

    #[test]
    fn gate_quiets_silence_and_keeps_bursts() {
        let f = tone_bursts(1);
        let out = noise_gate(&f.clip, &GatePolicy::default()).unwrap();
        let silent = db_change(
            region_rms(f.clip.samples(), &f.silent_regions),
            region_rms(out.samples(), &f.silent_regions),
        );
        let tone = db_change(
            region_rms(f.clip.samples(), &f.tone_regions),
            region_rms(out.samples(), &f.tone_regions),
        );
        assert!(silent <= -6.0, "silent change {silent} dB");
        assert!(tone.abs() < 1.0, "tone change {tone} dB");
    }

    #[test]
    fn second_pass_does_not_raise_silence() {
        let f = tone_bursts(2);
        let once = noise_gate(&f.clip, &GatePolicy::default()).unwrap();
        let twice = noise_gate(&once, &GatePolicy::default()).unwrap();
        assert_eq!(twice.len(), f.clip.len());
        assert!(
            region_rms(twice.samples(), &f.silent_regions)
                <= region_rms(once.samples(), &f.silent_regions)
        );
        assert!(rms(twice.samples()) > 0.0);
    }
}
