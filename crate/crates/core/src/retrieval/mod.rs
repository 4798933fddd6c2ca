//! Profile assembly and the end-to-end recognize pipeline.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::memo::MemoMeta;
use crate::store::{PersonRecord, Store, StoreError, StoreState};
use crate::vision::{
    best_match, detect_faces, encode_face, BoundingBox, DetectorConfig, DetectorModel, FaceEncoding,
    Image, MatchConfig, PersonMatch, VisionError,
};

/// What the console shows when a person is recognized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub person: PersonRecord,
    /// Newest first.
    pub memos: Vec<MemoMeta>,
    pub encoding_count: usize,
    pub presentation_text: String,
}

/// `"<name> \u{2014} <relationship>"` (just the name when the relationship is
/// empty), followed on a new line by the first line of the notes.
pub fn presentation_text(person: &PersonRecord) -> String {
    let mut text = person.name.clone();
    if !person.relationship.trim().is_empty() {
        text.push_str(" \u{2014} ");
        text.push_str(&person.relationship);
    }
    if let Some(first) = person.notes.lines().map(str::trim).find(|l| !l.is_empty()) {
        text.push('\n');
        text.push_str(first);
    }
    text
}

/// Profile from an already-locked state.
pub fn profile_in(state: &StoreState, person_id: u64) -> Option<Profile> {
    let person = state.person(person_id)?.clone();
    Some(Profile {
        presentation_text: presentation_text(&person),
        memos: state.memos_of(person_id),
        encoding_count: state.encoding_count(person_id),
        person,
    })
}

pub fn retrieve_profile(store: &Store, person_id: u64) -> Result<Profile, StoreError> {
    profile_in(&store.read(), person_id).ok_or(StoreError::NotFound {
        entity: "person",
        id: person_id,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaceMatch {
    pub person_id: u64,
    pub distance: f64,
    pub matched: bool,
}

impl From<PersonMatch> for FaceMatch {
    fn from(m: PersonMatch) -> Self {
        Self {
            person_id: m.person_id,
            distance: m.distance,
            matched: m.matched,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceOutcome {
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    #[serde(rename = "match")]
    pub matched: Option<FaceMatch>,
    pub profile: Option<Profile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecognitionOutcome {
    /// In detection order, highest score first.
    pub faces: Vec<FaceOutcome>,
    pub timestamp: DateTime<Utc>,
}

/// Detect, encode every face, match against all stored encodings and attach
/// the profile of each matched person. Faces that cannot be encoded are
/// reported unmatched. Matching and profile lookup read one consistent
/// store state.
pub fn recognize_and_retrieve(
    store: &Store,
    image: &Image,
    model: &DetectorModel,
    detector: &DetectorConfig,
    matching: &MatchConfig,
) -> Result<RecognitionOutcome, VisionError> {
    let boxes = detect_faces(image, model, detector)?;
    let encodings: Vec<Option<FaceEncoding>> =
        boxes.iter().map(|b| encode_face(image, b, detector).ok()).collect();
    let state = store.read();
    let known = state.all_encodings();
    let faces = boxes
        .into_iter()
        .zip(encodings)
        .map(|(bbox, enc)| {
            let matched = enc.and_then(|e| best_match(&known, &e, matching));
            let profile = matched.and_then(|m| profile_in(&state, m.person_id));
            FaceOutcome {
                bbox,
                matched: matched.map(FaceMatch::from),
                profile,
            }
        })
        .collect();
    Ok(RecognitionOutcome {
        faces,
        timestamp: store.now(),
    })
}
