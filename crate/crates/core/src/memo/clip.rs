use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::AudioError;

/// The only sample rate the engine stores.
pub const SAMPLE_RATE: u32 = 16_000;

/// Mono 16-bit PCM at [`SAMPLE_RATE`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AudioClip {
    samples: Vec<i16>,
}

impl AudioClip {
    pub fn new(samples: Vec<i16>) -> Self {
        Self { samples }
    }

    pub fn sample_rate(&self) -> u32 {
        SAMPLE_RATE
    }

    pub fn samples(&self) -> &[i16] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<i16> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / SAMPLE_RATE as f64
    }

    pub(crate) fn require_samples(&self) -> Result<(), AudioError> {
        if self.samples.is_empty() {
            Err(AudioError::EmptyAudio)
        } else {
            Ok(())
        }
    }
}

/// A stored voice memo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoiceMemo {
    pub memo_id: u64,
    pub person_id: Option<u64>,
    pub clip: AudioClip,
    pub created_at: DateTime<Utc>,
    pub label: String,
}

impl VoiceMemo {
    pub fn meta(&self) -> MemoMeta {
        MemoMeta {
            memo_id: self.memo_id,
            person_id: self.person_id,
            duration_s: self.clip.duration_s(),
            created_at: self.created_at,
            label: self.label.clone(),
        }
    }
}

/// A memo before the store has assigned it an id.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoDraft {
    pub person_id: Option<u64>,
    pub clip: AudioClip,
    /// Defaults to the store clock when absent.
    pub created_at: Option<DateTime<Utc>>,
    pub label: String,
}

impl MemoDraft {
    pub fn new(clip: AudioClip) -> Self {
        Self {
            person_id: None,
            clip,
            created_at: None,
            label: String::new(),
        }
    }

    pub fn for_person(mut self, person_id: u64) -> Self {
        self.person_id = Some(person_id);
        self
    }

    pub fn labelled(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn at(mut self, created_at: DateTime<Utc>) -> Self {
        self.created_at = Some(created_at);
        self
    }
}

/// JSON metadata form of a memo (no audio).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoMeta {
    pub memo_id: u64,
    pub person_id: Option<u64>,
    pub duration_s: f64,
    pub created_at: DateTime<Utc>,
    pub label: String,
}
