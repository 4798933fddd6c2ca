#![allow(dead_code)]

use std::sync::{Arc, OnceLock};

use axum::body::Body;
use axum::http::{HeaderMap, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use mfrs_core::engine::Engine;
use mfrs_core::eval::{generate_face_glyph, reference_detector, GlyphParams, EVAL_JITTER_BASE};
use mfrs_core::ingestion::encode_pnm;
use mfrs_core::memo::{write_wav, AudioClip};
use mfrs_core::store::{ManualClock, Store, StoreOptions};
use mfrs_core::vision::{DetectorConfig, DetectorModel, Image};
use mfrs_service::{AppState, ServiceConfig, API_SCHEMA};
use serde_json::{json, Value};
use tower::ServiceExt;

pub fn model() -> Arc<DetectorModel> {
    static MODEL: OnceLock<Arc<DetectorModel>> = OnceLock::new();
    MODEL
        .get_or_init(|| Arc::new(reference_detector(&DetectorConfig::default()).unwrap()))
        .clone()
}

pub struct Harness {
    pub app: Router,
    pub state: AppState,
    pub clock: ManualClock,
}

pub fn harness_with(config: ServiceConfig) -> Harness {
    let clock = ManualClock::new("2024-05-01T12:00:00Z".parse().unwrap());
    let store = Store::in_memory(StoreOptions::default().with_clock(clock.clone()));
    let engine = Engine::new(Arc::new(store), model(), config.engine()).unwrap();
    let state = AppState::new(engine, &config);
    Harness {
        app: mfrs_service::router(state.clone(), config.max_body_bytes),
        state,
        clock,
    }
}

pub fn harness() -> Harness {
    harness_with(ServiceConfig::default())
}

pub struct Reply {
    pub status: StatusCode,
    pub headers: HeaderMap,
    pub bytes: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.bytes)
            .unwrap_or_else(|e| panic!("{} is not JSON ({e}): {:?}", self.status, String::from_utf8_lossy(&self.bytes)))
    }

    /// Body parsed and checked against `def`, or against `ApiError` for
    /// error statuses.
    pub fn expect(&self, status: StatusCode, def: &str) -> Value {
        assert_eq!(self.status, status, "body: {}", String::from_utf8_lossy(&self.bytes));
        let v = self.json();
        let def = if status.is_success() { def } else { "ApiError" };
        validate(def, &v);
        v
    }

    pub fn error(&self, status: StatusCode, code: &str) -> Value {
        let v = self.expect(status, "ApiError");
        assert_eq!(v["code"], code, "{v}");
        v
    }
}

pub fn validate(def: &str, value: &Value) {
    let mut schema: Value = serde_json::from_str(API_SCHEMA).unwrap();
    schema["$ref"] = json!(format!("#/$defs/{def}"));
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(value).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{def} schema violations {errors:?} in {value}");
}

pub async fn send(app: &Router, method: Method, uri: &str, headers: &[(&str, &str)], body: Vec<u8>) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    for (k, v) in headers {
        req = req.header(*k, *v);
    }
    let resp = app.clone().oneshot(req.body(Body::from(body)).unwrap()).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, headers, bytes }
}

pub async fn get(app: &Router, uri: &str) -> Reply {
    send(app, Method::GET, uri, &[], vec![]).await
}

pub async fn post_json(app: &Router, uri: &str, body: Value) -> Reply {
    send(app, Method::POST, uri, &[("content-type", "application/json")], body.to_string().into_bytes()).await
}

pub async fn post_bytes(app: &Router, uri: &str, body: Vec<u8>) -> Reply {
    send(app, Method::POST, uri, &[], body).await
}

pub fn portrait(identity: u64, jitter: u64) -> Vec<u8> {
    let params = GlyphParams::new(identity, EVAL_JITTER_BASE + 100 * identity + jitter).placed((0.5, 0.5), 0.4);
    encode_pnm(&generate_face_glyph(&params).unwrap().0)
}

pub fn corner_portrait() -> Vec<u8> {
    let params = GlyphParams::new(4, 4242).canvas(720).placed((0.15, 0.15), 0.1);
    encode_pnm(&generate_face_glyph(&params).unwrap().0)
}

pub fn blank() -> Vec<u8> {
    encode_pnm(&Image::filled(200, 200, 90))
}

pub fn tone_wav(n: usize) -> Vec<u8> {
    write_wav(&AudioClip::new(
        (0..n).map(|i| ((i as f64 * 0.17).sin() * 8000.0) as i16).collect(),
    ))
}

/// 16 kHz 16-bit stereo WAV with a canonical header.
pub fn stereo_wav() -> Vec<u8> {
    let data: Vec<u8> = (0..400u32).flat_map(|i| (i as i16).to_le_bytes()).collect();
    let mut out = Vec::new();
    out.extend(b"RIFF");
    out.extend((36 + data.len() as u32).to_le_bytes());
    out.extend(b"WAVEfmt ");
    out.extend(16u32.to_le_bytes());
    out.extend(1u16.to_le_bytes());
    out.extend(2u16.to_le_bytes());
    out.extend(16000u32.to_le_bytes());
    out.extend((16000u32 * 4).to_le_bytes());
    out.extend(4u16.to_le_bytes());
    out.extend(16u16.to_le_bytes());
    out.extend(b"data");
    out.extend((data.len() as u32).to_le_bytes());
    out.extend(data);
    out
}
