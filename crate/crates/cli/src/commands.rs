use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use mfrs_core::engine::{context_from_store, intake_memo, load_or_train_detector, Engine, EngineError};
use mfrs_core::eval::{bench_db, eval_pairs, parse_pairs};
use mfrs_core::memo::{write_wav, MemoMeta};
use mfrs_core::retrieval::RecognitionOutcome;
use mfrs_core::store::{Durability, ManualClock, NewPerson, PersonPatch, Store, StoreOptions};
use mfrs_service::{AppState, ServiceConfig};
use serde::Serialize;
use serde_json::json;

use crate::{
    Backend, BenchCommand, Cli, Command, DurabilityArg, EnrollArgs, EvalCommand, Failure, MemoCommand,
    PersonCommand, MFRS_NOW,
};

struct Session<'a> {
    config: ServiceConfig,
    now: Option<DateTime<Utc>>,
    out: &'a mut dyn Write,
}

impl Session<'_> {
    fn options(&self) -> StoreOptions {
        let options = StoreOptions::default().durability(self.config.durability);
        match self.now {
            Some(now) => options.with_clock(ManualClock::new(now)),
            None => options,
        }
    }

    fn store(&self) -> Result<Arc<Store>, Failure> {
        Ok(Arc::new(Store::open(&self.config.data_dir, self.options())?))
    }

    fn engine(&self) -> Result<Engine, Failure> {
        let store = self.store()?;
        let model = load_or_train_detector(&self.config.data_dir, &self.config.detector)?;
        Ok(Engine::new(store, Arc::new(model), self.config.engine())?)
    }

    fn json(&mut self, value: &impl Serialize) -> Result<(), Failure> {
        let text = serde_json::to_string_pretty(value).map_err(Failure::io)?;
        writeln!(self.out, "{text}").map_err(Failure::io)
    }

    fn line(&mut self, text: &str) -> Result<(), Failure> {
        writeln!(self.out, "{text}").map_err(Failure::io)
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::io(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, bytes).map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))
}

pub fn dispatch(cli: Cli, env: &HashMap<String, String>, out: &mut dyn Write) -> Result<(), Failure> {
    let mut config = ServiceConfig::load(cli.config.as_deref(), env)?;
    if let Some(dir) = cli.data_dir {
        config.data_dir = dir;
    }
    let now = match env.get(MFRS_NOW) {
        Some(v) => Some(
            DateTime::parse_from_rfc3339(v)
                .map_err(|e| Failure::usage(format!("{MFRS_NOW}={v:?} is not an RFC 3339 time: {e}")))?
                .with_timezone(&Utc),
        ),
        None => None,
    };
    let mut s = Session { config, now, out };
    match cli.command {
        Command::Serve { bind } => serve(&mut s, bind),
        Command::Enroll(args) => enroll(&mut s, args),
        Command::Recognize { image, json } => recognize(&mut s, &image, json),
        Command::Memo(cmd) => memo(&mut s, cmd),
        Command::Person(cmd) => person(&mut s, cmd),
        Command::Export { out } => {
            let store = s.store()?;
            let bytes = store.export_snapshot();
            write(&out, &bytes)?;
            s.json(&json!({"path": out, "bytes": bytes.len(), "persons": store.list_persons().len()}))
        }
        Command::Import { input } => {
            let bytes = read(&input)?;
            let store = s.store()?;
            store.import_snapshot(&bytes)?;
            s.json(&json!({"persons": store.list_persons().len()}))
        }
        Command::Eval(EvalCommand::Pairs { pairs, images, roc }) => {
            let text = String::from_utf8(read(&pairs)?)
                .map_err(|_| Failure::io(format!("{} is not UTF-8", pairs.display())))?;
            let list = parse_pairs(&text, &images)?;
            let model = load_or_train_detector(&s.config.data_dir, &s.config.detector)?;
            let report = eval_pairs(&list, &model, &s.config.detector)?;
            if let Some(path) = roc {
                write(&path, report.roc_csv().as_bytes())?;
            }
            s.json(&report)
        }
        Command::Bench(BenchCommand::Db {
            n,
            backend,
            durability,
            seed,
            samples,
        }) => {
            let durability = match durability {
                DurabilityArg::Fsync => Durability::Fsync,
                DurabilityArg::Buffered => Durability::Buffered,
            };
            let options = StoreOptions::default().durability(durability);
            let scratch;
            let store = match backend {
                Backend::Memory => Store::in_memory(options),
                Backend::Disk => {
                    scratch = tempfile::tempdir().map_err(Failure::io)?;
                    Store::open(scratch.path(), options)?
                }
            };
            let report = bench_db(n, &store, seed)?;
            s.json(&if samples { report } else { report.without_samples() })
        }
    }
}

fn serve(s: &mut Session, bind: Option<String>) -> Result<(), Failure> {
    let mut config = s.config.clone();
    if let Some(bind) = bind {
        config.bind = bind;
    }
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(Failure::io)?;
    let engine = mfrs_service::open_engine(&config)?;
    runtime.block_on(async {
        let listener = mfrs_service::bind(&config).await?;
        let addr = listener.local_addr().map_err(mfrs_service::ServeError::Io)?;
        eprintln!("mfrs: serving {} on http://{addr}", config.data_dir.display());
        let state = AppState::new(engine, &config);
        mfrs_service::serve(listener, state, &config, mfrs_service::shutdown_signal()).await
    })?;
    Ok(())
}

fn enroll(s: &mut Session, args: EnrollArgs) -> Result<(), Failure> {
    let bytes = read(&args.image)?;
    let engine = s.engine()?;
    let mut ctx = engine.config.capture_context();
    let result = match args.person {
        Some(person_id) => engine
            .enroll_image(person_id, &bytes, args.override_framing, &mut ctx)
            .map(|(record, framing)| {
                json!({
                    "person_id": person_id,
                    "encoding_id": record.encoding_id,
                    "image_id": record.source_image,
                    "framing": framing,
                })
            }),
        None => {
            let new = NewPerson::new(args.name.unwrap_or_default())
                .relationship(args.relationship)
                .notes(args.notes);
            engine.enroll_new(new, &bytes, args.override_framing, &mut ctx).map(|e| {
                json!({
                    "person_id": e.person.person_id,
                    "encoding_id": e.encoding_id,
                    "framing": e.framing,
                    "person": e.person,
                })
            })
        }
    };
    match result {
        Ok(v) => s.json(&v),
        Err(EngineError::Framing(report)) => {
            s.json(&json!({"error": "framing_failed", "framing": report}))?;
            Err(EngineError::Framing(report).into())
        }
        Err(e) => Err(e.into()),
    }
}

fn recognize(s: &mut Session, image: &Path, as_json: bool) -> Result<(), Failure> {
    let bytes = read(image)?;
    let outcome = s.engine()?.recognize(&bytes)?;
    if as_json {
        s.json(&outcome)
    } else {
        let text = summary(&outcome);
        s.line(text.trim_end())
    }
}

/// Human-readable recognition summary.
pub fn summary(outcome: &RecognitionOutcome) -> String {
    if outcome.faces.is_empty() {
        return "no faces detected\n".to_string();
    }
    let mut text = String::new();
    for (i, face) in outcome.faces.iter().enumerate() {
        let b = face.bbox;
        let place = format!("face {} at top {} right {} bottom {} left {}", i + 1, b.top, b.right, b.bottom, b.left);
        match (&face.matched, &face.profile) {
            (Some(m), Some(p)) => {
                let mut lines = p.presentation_text.lines();
                let head = lines.next().unwrap_or_default();
                text.push_str(&format!("{place}: {head} (person {}, distance {:.3})\n", m.person_id, m.distance));
                for l in lines {
                    text.push_str(&format!("    {l}\n"));
                }
                if !p.memos.is_empty() {
                    text.push_str(&format!("    {} voice memo(s), newest #{}\n", p.memos.len(), p.memos[0].memo_id));
                }
            }
            _ => text.push_str(&format!("{place}: unknown person\n")),
        }
    }
    text
}

fn memo(s: &mut Session, cmd: MemoCommand) -> Result<(), Failure> {
    match cmd {
        MemoCommand::Add { file, person, label } => {
            let wav = read(&file)?;
            let store = s.store()?;
            let config = s.config.engine();
            let ctx = context_from_store(&store, config.association_window_s);
            let meta = intake_memo(&store, &config, &wav, person, &label, &ctx)?;
            s.json(&meta)
        }
        MemoCommand::List { person, unlinked } => {
            let store = s.store()?;
            let memos: Vec<MemoMeta> = match (person, unlinked) {
                (Some(p), _) => store.memos_for(p)?,
                (None, true) => store.unlinked_memos(),
                (None, false) => store.read().memos().map(|m| m.meta()).collect(),
            };
            s.json(&memos)
        }
        MemoCommand::Play { id, out } => {
            let memo = s.store()?.get_memo(id)?;
            write(&out, &write_wav(&memo.clip))?;
            s.json(&memo.meta())
        }
        MemoCommand::Link { id, person } => {
            let meta = s.store()?.link_memo(id, person)?;
            s.json(&meta)
        }
        MemoCommand::Delete { id } => {
            s.store()?.delete_memo(id)?;
            s.json(&json!({"deleted": id}))
        }
    }
}

fn person(s: &mut Session, cmd: PersonCommand) -> Result<(), Failure> {
    let store = s.store()?;
    match cmd {
        PersonCommand::List => s.json(&store.list_persons()),
        PersonCommand::Show { id } => s.json(&mfrs_core::retrieval::retrieve_profile(&store, id)?),
        PersonCommand::Add {
            name,
            relationship,
            notes,
        } => s.json(&store.create_person(NewPerson::new(name).relationship(relationship).notes(notes))?),
        PersonCommand::Update {
            id,
            name,
            relationship,
            notes,
        } => s.json(&store.update_person(
            id,
            PersonPatch {
                name,
                relationship,
                notes,
            },
        )?),
        PersonCommand::Delete { id } => {
            store.delete_person(id)?;
            s.json(&json!({"deleted": id}))
        }
    }
}
