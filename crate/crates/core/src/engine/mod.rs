//! The operations shared by the HTTP service and the command line:
//! enrollment with framing feedback, recognition, and memo intake.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::reference_detector;
use crate::ingestion::{framing_check, load_image, DecodeError, FramingPolicy, FramingReport};
use crate::memo::{
    associate_memo, noise_gate, read_wav, AudioError, CaptureContext, GatePolicy, MemoMeta, VoiceMemo,
    DEFAULT_ASSOCIATION_WINDOW_S,
};
use crate::retrieval::{recognize_and_retrieve, retrieve_profile, Profile, RecognitionOutcome};
use crate::store::{Applied, EncodingRecord, Mutation, NewPerson, PersonRecord, PersonRef, Store, StoreError};
use crate::vision::{encode_face, DetectorConfig, DetectorModel, MatchConfig, VisionError};

pub const DETECTOR_FILE: &str = "detector.bin";

/// Recognition, framing, audio and association parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub detector: DetectorConfig,
    pub matching: MatchConfig,
    pub framing: FramingPolicy,
    pub gate: GatePolicy,
    pub association_window_s: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            detector: DetectorConfig::default(),
            matching: MatchConfig::default(),
            framing: FramingPolicy::default(),
            gate: GatePolicy::default(),
            association_window_s: DEFAULT_ASSOCIATION_WINDOW_S,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        self.detector.validate()?;
        MatchConfig::new(self.matching.tolerance)?;
        CaptureContext::new(self.association_window_s)?;
        Ok(())
    }

    pub fn capture_context(&self) -> CaptureContext {
        CaptureContext::new(self.association_window_s).unwrap_or_default()
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error("framing check failed: {:?}", .0.failures)]
    Framing(Box<FramingReport>),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Vision(#[from] VisionError),
}

impl From<crate::memo::WavError> for EngineError {
    fn from(e: crate::memo::WavError) -> Self {
        EngineError::Audio(e.into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Enrollment {
    pub person: PersonRecord,
    pub encoding_id: u64,
    pub framing: FramingReport,
}

/// Load the detector saved in `data_dir`, or train the reference detector
/// and save it there. A saved model that does not fit `config` is replaced.
pub fn load_or_train_detector(data_dir: &Path, config: &DetectorConfig) -> Result<DetectorModel, EngineError> {
    let path = data_dir.join(DETECTOR_FILE);
    if let Ok(bytes) = std::fs::read(&path) {
        if let Ok(model) = DetectorModel::from_bytes(&bytes) {
            if model.check(config).is_ok() {
                return Ok(model);
            }
        }
    }
    let model = reference_detector(config).map_err(|e| match e {
        crate::eval::EvalError::Vision(v) => EngineError::Vision(v),
        other => EngineError::Vision(VisionError::InvalidConfig(other.to_string())),
    })?;
    std::fs::create_dir_all(data_dir).map_err(StoreError::from)?;
    let tmp = path.with_extension("bin.tmp");
    std::fs::write(&tmp, model.to_bytes()).map_err(StoreError::from)?;
    std::fs::rename(&tmp, &path).map_err(StoreError::from)?;
    Ok(model)
}

/// Store, detector and parameters bundled for request handling.
#[derive(Clone)]
pub struct Engine {
    pub store: Arc<Store>,
    pub model: Arc<DetectorModel>,
    pub config: EngineConfig,
}

impl Engine {
    pub fn new(store: Arc<Store>, model: Arc<DetectorModel>, config: EngineConfig) -> Result<Self, EngineError> {
        config.validate()?;
        model.check(&config.detector)?;
        Ok(Self { store, model, config })
    }

    /// Framing verdict for image bytes, and the decoded image when it passes
    /// or only has failures that `override_framing` waives.
    fn vet(
        &self,
        image_bytes: &[u8],
        override_framing: bool,
    ) -> Result<(crate::vision::Image, FramingReport), EngineError> {
        let image = load_image(image_bytes)?;
        let report = framing_check(&image, &self.model, &self.config.detector, &self.config.framing)?;
        let accepted = report.pass || (override_framing && report.face.is_some() && report.waivable());
        if !accepted {
            return Err(EngineError::Framing(Box::new(report)));
        }
        Ok((image, report))
    }

    /// Add an enrollment photo to an existing person and record the
    /// enrollment in `context`.
    pub fn enroll_image(
        &self,
        person_id: u64,
        image_bytes: &[u8],
        override_framing: bool,
        context: &mut CaptureContext,
    ) -> Result<(EncodingRecord, FramingReport), EngineError> {
        self.store.get_person(person_id)?;
        let (image, report) = self.vet(image_bytes, override_framing)?;
        let face = report.face.expect("vetted report has a face");
        let encoding = encode_face(&image, &face, &self.config.detector)?;
        let record = self.store.add_encoding(person_id, encoding, Some(image_bytes.to_vec()))?;
        context.enrolled(person_id, record.created_at);
        Ok((record, report))
    }

    /// Create a person from their first photo in one transaction; nothing is
    /// stored when framing fails.
    pub fn enroll_new(
        &self,
        person: NewPerson,
        image_bytes: &[u8],
        override_framing: bool,
        context: &mut CaptureContext,
    ) -> Result<Enrollment, EngineError> {
        let (image, report) = self.vet(image_bytes, override_framing)?;
        let face = report.face.expect("vetted report has a face");
        let encoding = encode_face(&image, &face, &self.config.detector)?;
        let applied = self.store.apply_transaction(vec![
            Mutation::CreatePerson(person),
            Mutation::AddEncoding {
                person: PersonRef::Created(0),
                encoding,
                source_image: Some(image_bytes.to_vec()),
            },
        ])?;
        let (Applied::Person(person), Applied::Encoding(enc)) = (&applied[0], &applied[1]) else {
            unreachable!("create + add_encoding returned {applied:?}")
        };
        context.enrolled(person.person_id, enc.created_at);
        Ok(Enrollment {
            person: person.clone(),
            encoding_id: enc.encoding_id,
            framing: report,
        })
    }

    pub fn recognize(&self, image_bytes: &[u8]) -> Result<RecognitionOutcome, EngineError> {
        let image = load_image(image_bytes)?;
        Ok(recognize_and_retrieve(
            &self.store,
            &image,
            &self.model,
            &self.config.detector,
            &self.config.matching,
        )?)
    }

    pub fn profile(&self, person_id: u64) -> Result<Profile, EngineError> {
        Ok(retrieve_profile(&self.store, person_id)?)
    }

    /// See [`intake_memo`].
    pub fn add_memo_wav(
        &self,
        wav: &[u8],
        person_id: Option<u64>,
        label: &str,
        context: &CaptureContext,
    ) -> Result<MemoMeta, EngineError> {
        intake_memo(&self.store, &self.config, wav, person_id, label, context)
    }
}

/// Decode and noise-gate a WAV memo, link it explicitly or through the
/// association window, and store it stamped with the store clock. A window
/// candidate that no longer exists leaves the memo unlinked.
pub fn intake_memo(
    store: &Store,
    config: &EngineConfig,
    wav: &[u8],
    person_id: Option<u64>,
    label: &str,
    context: &CaptureContext,
) -> Result<MemoMeta, EngineError> {
    let clip = read_wav(wav)?;
    let gated = noise_gate(&clip, &config.gate)?;
    let now = store.now();
    if let Some(p) = person_id {
        store.get_person(p)?;
    }
    let draft = VoiceMemo {
        memo_id: 0,
        person_id,
        clip: gated,
        created_at: now,
        label: label.to_string(),
    };
    let mut memo = associate_memo(draft, context, now);
    if person_id.is_none() {
        if let Some(p) = memo.person_id {
            if store.get_person(p).is_err() {
                memo.person_id = None;
            }
        }
    }
    Ok(store.add_memo(memo.person_id, memo.clip, Some(now), memo.label)?)
}

/// Capture context reconstructed from the store: the most recently created
/// encoding counts as the last enrollment.
pub fn context_from_store(store: &Store, window_s: f64) -> CaptureContext {
    let mut ctx = CaptureContext::new(window_s).unwrap_or_default();
    let state = store.read();
    if let Some(e) = state.encodings().max_by_key(|e| (e.created_at, e.encoding_id)) {
        ctx.enrolled(e.person_id, e.created_at);
    }
    ctx
}
