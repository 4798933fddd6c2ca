//! Randomized operation sequences through the HTTP API and the command line,
//! each compared with the same operations invoked on an engine directly.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request};
use chrono::{DateTime, Duration, Utc};
use http_body_util::BodyExt;
use mfrs_core::engine::{context_from_store, Engine, EngineConfig, EngineError, DETECTOR_FILE};
use mfrs_core::eval::{generate_face_glyph, GlyphParams, EVAL_JITTER_BASE};
use mfrs_core::ingestion::encode_pnm;
use mfrs_core::memo::{write_wav, AudioClip, CaptureContext};
use mfrs_core::rng::SplitMix64;
use mfrs_core::store::{ManualClock, NewPerson, PersonPatch, Store, StoreError, StoreOptions};
use mfrs_core::vision::Image;
use mfrs_service::{ApiError, AppState, ServiceConfig};
use serde_json::{json, Value};
use tower::ServiceExt;

use crate::{ensure, Shared};

const SEQUENCES: u64 = 200;
const EPOCH: &str = "2024-06-01T08:00:00Z";

#[derive(Debug, Clone)]
enum Op {
    EnrollNew { name: String, relationship: String, image: usize, override_framing: bool },
    AddImage { person: u64, image: usize, override_framing: bool },
    Recognize { image: usize },
    Memo { wav: usize, person: Option<u64>, label: String },
    Link { memo: u64, person: u64 },
    Update { person: u64, name: Option<String>, notes: Option<String> },
    DeletePerson { person: u64 },
    DeleteMemo { memo: u64 },
}

#[derive(Debug, Clone)]
struct Step {
    advance_s: i64,
    op: Op,
}

struct Pool {
    dir: tempfile::TempDir,
    images: Vec<Vec<u8>>,
    wavs: Vec<Vec<u8>>,
}

impl Pool {
    fn new() -> Self {
        let mut images = Vec::new();
        for id in 0..3u64 {
            for j in 0..2u64 {
                let p = GlyphParams::new(id, EVAL_JITTER_BASE + 100 * id + j).placed((0.5, 0.5), 0.4);
                images.push(encode_pnm(&generate_face_glyph(&p).unwrap().0));
            }
        }
        let off = GlyphParams::new(3, 7001).canvas(400).placed((0.2, 0.2), 0.18);
        images.push(encode_pnm(&generate_face_glyph(&off).unwrap().0));
        images.push(encode_pnm(&Image::filled(160, 160, 70)));
        images.push(b"definitely not an image".to_vec());

        let tone = |n: usize, k: f64| write_wav(&AudioClip::new((0..n).map(|i| ((i as f64 * k).sin() * 7000.0) as i16).collect()));
        let mut stereo = tone(800, 0.1);
        stereo[22] = 2;
        let truncated = tone(2000, 0.3)[..300].to_vec();
        let wavs = vec![tone(8000, 0.13), tone(3000, 0.31), stereo, truncated];

        let dir = tempfile::tempdir().unwrap();
        for (i, b) in images.iter().enumerate() {
            std::fs::write(dir.path().join(format!("img{i}.pgm")), b).unwrap();
        }
        for (i, b) in wavs.iter().enumerate() {
            std::fs::write(dir.path().join(format!("memo{i}.wav")), b).unwrap();
        }
        Self { dir, images, wavs }
    }

    fn image_path(&self, i: usize) -> PathBuf {
        self.dir.path().join(format!("img{i}.pgm"))
    }

    fn wav_path(&self, i: usize) -> PathBuf {
        self.dir.path().join(format!("memo{i}.wav"))
    }
}

fn pick<'a>(rng: &mut SplitMix64, items: &[&'a str]) -> &'a str {
    items[rng.below(items.len() as u64) as usize]
}

fn script(seed: u64, pool: &Pool) -> Vec<Step> {
    let mut rng = SplitMix64::new(seed);
    let steps = 6 + rng.below(5);
    let (mut persons, mut memos) = (0u64, 0u64);
    let mut out = Vec::new();
    for _ in 0..steps {
        let advance_s = [0, 1, 30, 60, 119, 121, 200][rng.below(7) as usize];
        let person = 1 + rng.below(persons + 1);
        let memo = 1 + rng.below(memos + 1);
        let image = rng.below(pool.images.len() as u64) as usize;
        let op = match rng.below(100) {
            0..=19 => {
                persons += 1;
                Op::EnrollNew {
                    name: pick(&mut rng, &["Ada", "Bo", "Cy Young", ""]).into(),
                    relationship: pick(&mut rng, &["", "niece", "neighbour"]).into(),
                    image,
                    override_framing: rng.below(2) == 0,
                }
            }
            20..=34 => Op::AddImage {
                person,
                image,
                override_framing: rng.below(2) == 0,
            },
            35..=41 => Op::Recognize { image },
            42..=66 => {
                memos += 1;
                Op::Memo {
                    wav: rng.below(pool.wavs.len() as u64) as usize,
                    person: (rng.below(3) == 0).then_some(person),
                    label: pick(&mut rng, &["", "park", "after lunch"]).into(),
                }
            }
            67..=74 => Op::Link { memo, person },
            75..=82 => Op::Update {
                person,
                name: (rng.below(2) == 0).then(|| pick(&mut rng, &["Dee", ""]).into()),
                notes: (rng.below(2) == 0).then(|| pick(&mut rng, &["tea", "first line\nsecond"]).into()),
            },
            83..=91 => Op::DeletePerson { person },
            _ => Op::DeleteMemo { memo },
        };
        out.push(Step { advance_s, op });
    }
    out
}

/// A facade-independent result: success with an optional comparable body,
/// or the error the engine raised.
type Direct = Result<Option<Value>, EngineError>;

fn store_err(e: StoreError) -> EngineError {
    EngineError::Store(e)
}

/// Operations common to both facades.
fn direct_common(engine: &Engine, op: &Op) -> Option<Direct> {
    let store = &engine.store;
    Some(match op {
        Op::Link { memo, person } => store.link_memo(*memo, *person).map(|_| None).map_err(store_err),
        Op::Update { person, name, notes } => store
            .update_person(
                *person,
                PersonPatch {
                    name: name.clone(),
                    relationship: None,
                    notes: notes.clone(),
                },
            )
            .map(|_| None)
            .map_err(store_err),
        Op::DeletePerson { person } => store.delete_person(*person).map(|_| None).map_err(store_err),
        Op::DeleteMemo { memo } => store.delete_memo(*memo).map(|_| None).map_err(store_err),
        _ => return None,
    })
}

/// What the API does, expressed as engine calls: a person is created first
/// and the photo added in a second request, memos use the session context.
fn direct_api(engine: &Engine, ctx: &mut CaptureContext, pool: &Pool, op: &Op) -> Direct {
    if let Some(r) = direct_common(engine, op) {
        return r;
    }
    match op {
        Op::EnrollNew { name, relationship, image, override_framing } => {
            let p = engine
                .store
                .create_person(NewPerson::new(name.clone()).relationship(relationship.clone()))
                .map_err(store_err)?;
            engine.enroll_image(p.person_id, &pool.images[*image], *override_framing, ctx)?;
            Ok(None)
        }
        Op::AddImage { person, image, override_framing } => {
            engine.enroll_image(*person, &pool.images[*image], *override_framing, ctx)?;
            Ok(None)
        }
        Op::Recognize { image } => Ok(Some(serde_json::to_value(engine.recognize(&pool.images[*image])?).unwrap())),
        Op::Memo { wav, person, label } => {
            let meta = engine.add_memo_wav(&pool.wavs[*wav], *person, label, ctx)?;
            Ok(Some(serde_json::to_value(meta).unwrap()))
        }
        _ => unreachable!(),
    }
}

/// What the command line does: atomic enroll of a new person, memo context
/// rebuilt from the newest stored enrollment.
fn direct_cli(engine: &Engine, pool: &Pool, op: &Op) -> Direct {
    if let Some(r) = direct_common(engine, op) {
        return r;
    }
    let mut scratch = engine.config.capture_context();
    match op {
        Op::EnrollNew { name, relationship, image, override_framing } => {
            let new = NewPerson::new(name.clone()).relationship(relationship.clone());
            engine.enroll_new(new, &pool.images[*image], *override_framing, &mut scratch)?;
            Ok(None)
        }
        Op::AddImage { person, image, override_framing } => {
            engine.enroll_image(*person, &pool.images[*image], *override_framing, &mut scratch)?;
            Ok(None)
        }
        Op::Recognize { image } => Ok(Some(serde_json::to_value(engine.recognize(&pool.images[*image])?).unwrap())),
        Op::Memo { wav, person, label } => {
            let ctx = context_from_store(&engine.store, engine.config.association_window_s);
            let meta = engine.add_memo_wav(&pool.wavs[*wav], *person, label, &ctx)?;
            Ok(Some(serde_json::to_value(meta).unwrap()))
        }
        _ => unreachable!(),
    }
}

struct Reply {
    status: u16,
    body: Option<Value>,
}

async fn request(app: &axum::Router, method: Method, uri: String, body: Vec<u8>) -> Reply {
    let req = Request::builder().method(method).uri(uri).body(Body::from(body)).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status().as_u16();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    Reply {
        status,
        body: serde_json::from_slice(&bytes).ok(),
    }
}

fn query_text(s: &str) -> String {
    s.replace(' ', "%20")
}

async fn via_api(app: &axum::Router, pool: &Pool, op: &Op) -> Reply {
    match op {
        Op::EnrollNew { name, relationship, image, override_framing } => {
            let body = json!({"name": name, "relationship": relationship}).to_string().into_bytes();
            let created = request(app, Method::POST, "/api/persons".into(), body).await;
            if created.status != 201 {
                return created;
            }
            let id = created.body.as_ref().unwrap()["person_id"].as_u64().unwrap();
            let uri = format!("/api/persons/{id}/images?override_framing={override_framing}");
            let mut r = request(app, Method::POST, uri, pool.images[*image].clone()).await;
            r.body = None;
            r
        }
        Op::AddImage { person, image, override_framing } => {
            let uri = format!("/api/persons/{person}/images?override_framing={override_framing}");
            let mut r = request(app, Method::POST, uri, pool.images[*image].clone()).await;
            r.body = None;
            r
        }
        Op::Recognize { image } => request(app, Method::POST, "/api/recognize".into(), pool.images[*image].clone()).await,
        Op::Memo { wav, person, label } => {
            let mut uri = format!("/api/memos?label={}", query_text(label));
            if let Some(p) = person {
                uri.push_str(&format!("&person_id={p}"));
            }
            request(app, Method::POST, uri, pool.wavs[*wav].clone()).await
        }
        Op::Link { memo, person } => {
            let body = json!({"person_id": person}).to_string().into_bytes();
            let mut r = request(app, Method::POST, format!("/api/memos/{memo}/link"), body).await;
            r.body = None;
            r
        }
        Op::Update { person, name, notes } => {
            let mut patch = serde_json::Map::new();
            if let Some(n) = name {
                patch.insert("name".into(), json!(n));
            }
            if let Some(n) = notes {
                patch.insert("notes".into(), json!(n));
            }
            let mut r = request(app, Method::PATCH, format!("/api/persons/{person}"), Value::Object(patch).to_string().into_bytes()).await;
            r.body = None;
            r
        }
        Op::DeletePerson { person } => request(app, Method::DELETE, format!("/api/persons/{person}"), vec![]).await,
        Op::DeleteMemo { memo } => request(app, Method::DELETE, format!("/api/memos/{memo}"), vec![]).await,
    }
}

fn cli_args(pool: &Pool, op: &Op) -> Vec<String> {
    let path = |p: &Path| p.to_str().unwrap().to_string();
    let mut a: Vec<String> = vec!["mfrs".into()];
    let s = |v: &str| v.to_string();
    match op {
        Op::EnrollNew { name, relationship, image, override_framing } => {
            a.extend([s("enroll"), s("--name"), name.clone(), s("--relationship"), relationship.clone()]);
            a.extend([s("--image"), path(&pool.image_path(*image))]);
            if *override_framing {
                a.push(s("--override-framing"));
            }
        }
        Op::AddImage { person, image, override_framing } => {
            a.extend([s("enroll"), s("--person"), person.to_string(), s("--image"), path(&pool.image_path(*image))]);
            if *override_framing {
                a.push(s("--override-framing"));
            }
        }
        Op::Recognize { image } => a.extend([s("recognize"), s("--json"), s("--image"), path(&pool.image_path(*image))]),
        Op::Memo { wav, person, label } => {
            a.extend([s("memo"), s("add"), s("--file"), path(&pool.wav_path(*wav)), s("--label"), label.clone()]);
            if let Some(p) = person {
                a.extend([s("--person"), p.to_string()]);
            }
        }
        Op::Link { memo, person } => {
            a.extend([s("memo"), s("link"), s("--id"), memo.to_string(), s("--person"), person.to_string()])
        }
        Op::Update { person, name, notes } => {
            a.extend([s("person"), s("update"), s("--id"), person.to_string()]);
            if let Some(n) = name {
                a.extend([s("--name"), n.clone()]);
            }
            if let Some(n) = notes {
                a.extend([s("--notes"), n.clone()]);
            }
        }
        Op::DeletePerson { person } => a.extend([s("person"), s("delete"), s("--id"), person.to_string()]),
        Op::DeleteMemo { memo } => a.extend([s("memo"), s("delete"), s("--id"), memo.to_string()]),
    }
    a
}

fn comparable(op: &Op) -> bool {
    matches!(op, Op::Recognize { .. } | Op::Memo { .. })
}

fn engine_with_clock(s: &Shared, start: DateTime<Utc>) -> (Engine, ManualClock) {
    let clock = ManualClock::new(start);
    let store = Store::in_memory(StoreOptions::default().with_clock(clock.clone()));
    let engine = Engine::new(Arc::new(store), Arc::new(s.model.clone()), EngineConfig::default()).unwrap();
    (engine, clock)
}

fn run_sequence(
    s: &Shared,
    pool: &Pool,
    runtime: &tokio::runtime::Runtime,
    seq: u64,
    tally: &mut HashMap<&'static str, usize>,
) -> Result<(), String> {
    let steps = script(0xFACA_DE00 + seq, pool);
    let start: DateTime<Utc> = EPOCH.parse().unwrap();

    let (api_ref, api_ref_clock) = engine_with_clock(s, start);
    let mut api_ctx = api_ref.config.capture_context();
    let (api_engine, api_clock) = engine_with_clock(s, start);
    let config = ServiceConfig::default();
    let app = mfrs_service::router(AppState::new(api_engine.clone(), &config), config.max_body_bytes);

    let (cli_ref, cli_ref_clock) = engine_with_clock(s, start);
    let cli_dir = tempfile::tempdir().unwrap();
    std::fs::write(cli_dir.path().join(DETECTOR_FILE), s.model.to_bytes()).unwrap();
    let mut env = HashMap::from([
        ("MFRS_DATA_DIR".to_string(), cli_dir.path().to_str().unwrap().to_string()),
        ("MFRS_DURABILITY".to_string(), "buffered".to_string()),
    ]);

    let mut now = start;
    for (i, step) in steps.iter().enumerate() {
        let ctx = || format!("sequence {seq} step {i} {:?}", step.op);
        for c in [&api_ref_clock, &api_clock, &cli_ref_clock] {
            c.advance_secs(step.advance_s);
        }
        now += Duration::seconds(step.advance_s);
        env.insert("MFRS_NOW".into(), now.to_rfc3339());

        let expected = direct_api(&api_ref, &mut api_ctx, pool, &step.op);
        let got = runtime.block_on(via_api(&app, pool, &step.op));
        match &expected {
            Ok(body) => {
                ensure((200..300).contains(&got.status), || format!("{}: API {} but engine succeeded", ctx(), got.status))?;
                if comparable(&step.op) {
                    ensure(got.body == *body, || format!("{}: API body {:?} != engine {:?}", ctx(), got.body, body))?;
                }
            }
            Err(e) => {
                let want = ApiError::from(clone_err(e)).status().as_u16();
                ensure(got.status == want, || format!("{}: API {} but engine error {e} maps to {want}", ctx(), got.status))?;
            }
        }
        *tally.entry(if expected.is_ok() { "ok" } else { "error" }).or_default() += 1;

        let expected = direct_cli(&cli_ref, pool, &step.op);
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = mfrs_cli::run(cli_args(pool, &step.op), &env, &mut out, &mut err);
        match &expected {
            Ok(body) => {
                ensure(code == 0, || format!("{}: CLI exit {code} ({}) but engine succeeded", ctx(), String::from_utf8_lossy(&err)))?;
                if comparable(&step.op) {
                    let printed: Value = serde_json::from_slice(&out).map_err(|e| format!("{}: CLI output: {e}", ctx()))?;
                    ensure(Some(&printed) == body.as_ref(), || format!("{}: CLI printed {printed} != engine {body:?}", ctx()))?;
                }
            }
            Err(e) => {
                let want = mfrs_cli::Failure::from(clone_err(e)).code;
                ensure(code == want, || format!("{}: CLI exit {code} but engine error {e} maps to {want}", ctx()))?;
            }
        }
    }

    ensure(api_engine.store.state() == api_ref.store.state(), || format!("sequence {seq}: API store differs from engine"))?;
    ensure(api_engine.store.export_snapshot() == api_ref.store.export_snapshot(), || {
        format!("sequence {seq}: API snapshot bytes differ")
    })?;
    let cli_store = Store::open(cli_dir.path(), StoreOptions::default()).map_err(|e| e.to_string())?;
    ensure(cli_store.state() == cli_ref.store.state(), || format!("sequence {seq}: CLI store differs from engine"))?;
    *tally.entry("persons").or_default() += cli_store.list_persons().len();
    *tally.entry("memos").or_default() += cli_store.read().memos().count();
    *tally.entry("steps").or_default() += steps.len();
    Ok(())
}

/// Engine errors are not `Clone`; rebuild one with the same mapping class.
fn clone_err(e: &EngineError) -> EngineError {
    use mfrs_core::memo::{AudioError, WavError};
    match e {
        EngineError::Decode(d) => EngineError::Decode(mfrs_core::ingestion::DecodeError::Malformed(d.to_string())),
        EngineError::Audio(AudioError::Wav(WavError::Unsupported(m))) => {
            EngineError::Audio(AudioError::Wav(WavError::Unsupported(m.clone())))
        }
        EngineError::Audio(AudioError::Wav(WavError::Malformed(m))) => {
            EngineError::Audio(AudioError::Wav(WavError::Malformed(m.clone())))
        }
        EngineError::Audio(AudioError::EmptyAudio) => EngineError::Audio(AudioError::EmptyAudio),
        EngineError::Audio(AudioError::InvalidWindow(w)) => EngineError::Audio(AudioError::InvalidWindow(*w)),
        EngineError::Framing(r) => EngineError::Framing(r.clone()),
        EngineError::Store(StoreError::NotFound { entity, id }) => EngineError::Store(StoreError::not_found(entity, *id)),
        EngineError::Store(StoreError::Validation(m)) => EngineError::Store(StoreError::Validation(m.clone())),
        EngineError::Store(other) => EngineError::Store(StoreError::Journal(other.to_string())),
        EngineError::Vision(v) => EngineError::Vision(mfrs_core::vision::VisionError::InvalidInput(v.to_string())),
    }
}

pub fn facade_equivalence(s: &Shared) -> Result<String, String> {
    let pool = Pool::new();
    let runtime = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
    let mut tally = HashMap::new();
    for seq in 0..SEQUENCES {
        run_sequence(s, &pool, &runtime, seq, &mut tally)?;
    }
    let get = |k: &str| tally.get(k).copied().unwrap_or(0);
    Ok(format!(
        "{SEQUENCES} sequences, {} steps in total through API and CLI ({} accepted, {} rejected by the engine with matching status and exit codes); final stores equal the direct engine ({} persons, {} memos in CLI stores)",
        get("steps"),
        get("ok"),
        get("error"),
        get("persons"),
        get("memos")
    ))
}
