use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::memo::{AudioClip, MemoMeta, VoiceMemo};
use crate::vision::FaceEncoding;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonRecord {
    pub person_id: u64,
    pub name: String,
    pub relationship: String,
    pub notes: String,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingRecord {
    pub encoding_id: u64,
    pub person_id: u64,
    pub encoding: FaceEncoding,
    /// Id of the stored enrollment image, when one was kept.
    pub source_image: Option<u64>,
    pub created_at: DateTime<Utc>,
}

/// Original enrollment image bytes, owned by a person.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: u64,
    pub person_id: u64,
    pub bytes: Vec<u8>,
    pub created_at: DateTime<Utc>,
}

/// Input for creating a person.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NewPerson {
    pub name: String,
    #[serde(default)]
    pub relationship: String,
    #[serde(default)]
    pub notes: String,
}

impl NewPerson {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Self::default()
        }
    }

    pub fn relationship(mut self, r: impl Into<String>) -> Self {
        self.relationship = r.into();
        self
    }

    pub fn notes(mut self, n: impl Into<String>) -> Self {
        self.notes = n.into();
        self
    }
}

/// Partial update; absent fields are left untouched.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PersonPatch {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relationship: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
}

/// Stored form of a memo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct MemoRow {
    pub memo_id: u64,
    pub person_id: Option<u64>,
    pub samples: Vec<i16>,
    pub created_at: DateTime<Utc>,
    pub label: String,
}

impl MemoRow {
    pub fn meta(&self) -> MemoMeta {
        MemoMeta {
            memo_id: self.memo_id,
            person_id: self.person_id,
            duration_s: self.samples.len() as f64 / crate::memo::SAMPLE_RATE as f64,
            created_at: self.created_at,
            label: self.label.clone(),
        }
    }

    pub fn to_memo(&self) -> VoiceMemo {
        VoiceMemo {
            memo_id: self.memo_id,
            person_id: self.person_id,
            clip: AudioClip::new(self.samples.clone()),
            created_at: self.created_at,
            label: self.label.clone(),
        }
    }
}
