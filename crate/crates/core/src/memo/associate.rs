use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::clip::VoiceMemo;
use super::AudioError;

pub const DEFAULT_ASSOCIATION_WINDOW_S: f64 = 120.0;

/// Most recent enrollment seen by a capture session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureContext {
    pub last_enrollment: Option<(u64, DateTime<Utc>)>,
    association_window_s: f64,
}

impl Default for CaptureContext {
    fn default() -> Self {
        Self {
            last_enrollment: None,
            association_window_s: DEFAULT_ASSOCIATION_WINDOW_S,
        }
    }
}

impl CaptureContext {
    pub fn new(association_window_s: f64) -> Result<Self, AudioError> {
        if !(association_window_s > 0.0 && association_window_s.is_finite()) {
            return Err(AudioError::InvalidWindow(association_window_s));
        }
        Ok(Self {
            last_enrollment: None,
            association_window_s,
        })
    }

    pub fn association_window_s(&self) -> f64 {
        self.association_window_s
    }

    pub fn enrolled(&mut self, person_id: u64, at: DateTime<Utc>) {
        self.last_enrollment = Some((person_id, at));
    }

    pub fn with_enrollment(mut self, person_id: u64, at: DateTime<Utc>) -> Self {
        self.enrolled(person_id, at);
        self
    }

    /// Person a memo recorded at `now` would be linked to.
    pub fn candidate(&self, now: DateTime<Utc>) -> Option<u64> {
        let (person_id, at) = self.last_enrollment?;
        let elapsed = (now - at).num_milliseconds() as f64 / 1000.0;
        (elapsed >= 0.0 && elapsed <= self.association_window_s).then_some(person_id)
    }
}

/// Link an unlinked memo to the session's last enrollment when `now` falls
/// inside the association window. Linked memos pass through unchanged.
pub fn associate_memo(mut memo: VoiceMemo, context: &CaptureContext, now: DateTime<Utc>) -> VoiceMemo {
    if memo.person_id.is_none() {
        memo.person_id = context.candidate(now);
    }
    memo
}
