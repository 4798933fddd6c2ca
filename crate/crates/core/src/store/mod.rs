//! Transactional person store: in-memory tables, a write-ahead journal and
//! checksummed snapshots in a data directory.

mod clock;
mod journal;
mod records;
mod snapshot;
mod tables;

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard, RwLock, RwLockReadGuard};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::memo::{AudioClip, MemoMeta, VoiceMemo};
use crate::vision::FaceEncoding;
use journal::Entry;
use records::MemoRow;
use tables::{Op, Undo};

pub use clock::{Clock, ManualClock, SystemClock};
pub use records::{EncodingRecord, ImageRecord, NewPerson, PersonPatch, PersonRecord};
pub use snapshot::{SNAPSHOT_MAGIC, SNAPSHOT_VERSION};
pub use tables::{Counters, StoreState};

pub const JOURNAL_FILE: &str = "journal.log";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{entity} {id} not found")]
    NotFound { entity: &'static str, id: u64 },
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),
    #[error("unsupported snapshot version {0}")]
    UnsupportedVersion(u32),
    #[error("corrupt journal: {0}")]
    Journal(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl StoreError {
    pub fn not_found(entity: &'static str, id: u64) -> Self {
        Self::NotFound { entity, id }
    }
}

/// When a commit counts as durable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Durability {
    /// `fsync` the journal before a commit returns.
    #[default]
    Fsync,
    /// Hand the record to the OS and return; survives process crashes only.
    Buffered,
}

#[derive(Clone)]
pub struct StoreOptions {
    pub durability: Durability,
    pub clock: Arc<dyn Clock>,
}

impl Default for StoreOptions {
    fn default() -> Self {
        Self {
            durability: Durability::Fsync,
            clock: Arc::new(SystemClock),
        }
    }
}

impl StoreOptions {
    pub fn with_clock(mut self, clock: impl Clock + 'static) -> Self {
        self.clock = Arc::new(clock);
        self
    }

    pub fn durability(mut self, durability: Durability) -> Self {
        self.durability = durability;
        self
    }
}

/// A person named in a transaction: an existing id, or the person created
/// by an earlier `CreatePerson` at the given position in the same transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PersonRef {
    Id(u64),
    Created(usize),
}

impl From<u64> for PersonRef {
    fn from(id: u64) -> Self {
        PersonRef::Id(id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mutation {
    CreatePerson(NewPerson),
    UpdatePerson {
        person: PersonRef,
        patch: PersonPatch,
    },
    DeletePerson(PersonRef),
    AddEncoding {
        person: PersonRef,
        encoding: FaceEncoding,
        /// Original image bytes to keep alongside the encoding.
        source_image: Option<Vec<u8>>,
    },
    AddMemo {
        person: Option<PersonRef>,
        clip: AudioClip,
        /// Store clock when absent.
        created_at: Option<DateTime<Utc>>,
        label: String,
    },
    LinkMemo {
        memo_id: u64,
        person: PersonRef,
    },
    DeleteMemo(u64),
}

/// Result of one mutation.
#[derive(Debug, Clone, PartialEq)]
pub enum Applied {
    Person(PersonRecord),
    Encoding(EncodingRecord),
    Memo(MemoMeta),
    Deleted,
}

/// Ordered mutations applied all-or-nothing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Transaction {
    pub mutations: Vec<Mutation>,
}

impl Transaction {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(mut self, m: Mutation) -> Self {
        self.mutations.push(m);
        self
    }
}

impl From<Vec<Mutation>> for Transaction {
    fn from(mutations: Vec<Mutation>) -> Self {
        Self { mutations }
    }
}

enum Backend {
    Memory { journal: Vec<u8> },
    Disk { dir: PathBuf, journal: File, durability: Durability },
}

struct Writer {
    backend: Backend,
    seq: u64,
}

/// Single-writer, multi-reader handle. Readers only ever observe committed
/// state; writes are serialized and journaled before they become visible.
pub struct Store {
    state: RwLock<StoreState>,
    writer: Mutex<Writer>,
    clock: Arc<dyn Clock>,
}

impl Store {
    /// A store with no files; the journal is kept in memory.
    pub fn in_memory(options: StoreOptions) -> Self {
        Self {
            state: RwLock::new(StoreState::default()),
            writer: Mutex::new(Writer {
                backend: Backend::Memory { journal: Vec::new() },
                seq: 0,
            }),
            clock: options.clock,
        }
    }

    /// Open or create a store in `dir`, replaying the journal over the last
    /// checkpoint. A torn final journal record is discarded, then the state
    /// is checkpointed and the journal emptied.
    pub fn open(dir: impl AsRef<Path>, options: StoreOptions) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let checkpoint = match fs::read(dir.join(CHECKPOINT_FILE)) {
            Ok(b) => Some(b),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
            Err(e) => return Err(e.into()),
        };
        let journal_bytes = match fs::read(dir.join(JOURNAL_FILE)) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(e.into()),
        };
        let (seq, state) = recover_parts(checkpoint.as_deref(), &journal_bytes)?;
        if !journal_bytes.is_empty() || checkpoint.is_none() {
            write_checkpoint(&dir, seq, &state)?;
        }
        let journal = reset_journal(&dir)?;
        Ok(Self {
            state: RwLock::new(state),
            writer: Mutex::new(Writer {
                backend: Backend::Disk {
                    dir,
                    journal,
                    durability: options.durability,
                },
                seq,
            }),
            clock: options.clock,
        })
    }

    /// State recovered from raw checkpoint and journal bytes, as `open` would
    /// see them after a crash.
    pub fn recover_state(checkpoint: Option<&[u8]>, journal: &[u8]) -> Result<StoreState, StoreError> {
        recover_parts(checkpoint, journal).map(|(_, s)| s)
    }

    /// Journal bytes written so far by an in-memory store.
    pub fn journal_bytes(&self) -> Option<Vec<u8>> {
        match &self.lock_writer().backend {
            Backend::Memory { journal } => Some(journal.clone()),
            Backend::Disk { .. } => None,
        }
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    pub fn now(&self) -> DateTime<Utc> {
        self.clock.now()
    }

    /// Read access to committed state.
    pub fn read(&self) -> RwLockReadGuard<'_, StoreState> {
        self.state.read().unwrap_or_else(|e| e.into_inner())
    }

    /// A copy of the committed state.
    pub fn state(&self) -> StoreState {
        self.read().clone()
    }

    fn lock_writer(&self) -> MutexGuard<'_, Writer> {
        self.writer.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Apply every mutation or none. On failure the first error is returned
    /// and no change is visible or journaled.
    pub fn apply_transaction(&self, tx: impl Into<Transaction>) -> Result<Vec<Applied>, StoreError> {
        let tx = tx.into();
        let mut writer = self.lock_writer();
        let mut state = self.state.write().unwrap_or_else(|e| e.into_inner());
        let saved = state.counters.clone();
        let mut undo = Vec::new();
        let mut ops = Vec::new();
        let now = self.clock.now();

        let outcome = stage(&mut state, &tx, now, &mut ops, &mut undo);
        let applied = match outcome {
            Ok(a) => a,
            Err(e) => {
                state.rollback(undo, saved);
                return Err(e);
            }
        };
        if ops.is_empty() {
            return Ok(applied);
        }
        let entry = Entry {
            seq: writer.seq + 1,
            ops,
        };
        if let Err(e) = writer.append(&entry) {
            state.rollback(undo, saved);
            return Err(e);
        }
        writer.seq = entry.seq;
        Ok(applied)
    }

    fn apply_one(&self, m: Mutation) -> Result<Applied, StoreError> {
        Ok(self.apply_transaction(vec![m])?.remove(0))
    }

    pub fn create_person(&self, person: NewPerson) -> Result<PersonRecord, StoreError> {
        match self.apply_one(Mutation::CreatePerson(person))? {
            Applied::Person(p) => Ok(p),
            other => unreachable!("create returned {other:?}"),
        }
    }

    pub fn update_person(&self, person_id: u64, patch: PersonPatch) -> Result<PersonRecord, StoreError> {
        match self.apply_one(Mutation::UpdatePerson {
            person: person_id.into(),
            patch,
        })? {
            Applied::Person(p) => Ok(p),
            other => unreachable!("update returned {other:?}"),
        }
    }

    /// Remove a person with their encodings, images and memos.
    pub fn delete_person(&self, person_id: u64) -> Result<(), StoreError> {
        self.apply_one(Mutation::DeletePerson(person_id.into())).map(|_| ())
    }

    pub fn get_person(&self, person_id: u64) -> Result<PersonRecord, StoreError> {
        self.read()
            .person(person_id)
            .cloned()
            .ok_or_else(|| StoreError::not_found("person", person_id))
    }

    /// All persons, ascending by id.
    pub fn list_persons(&self) -> Vec<PersonRecord> {
        self.read().persons().cloned().collect()
    }

    pub fn add_encoding(
        &self,
        person_id: u64,
        encoding: FaceEncoding,
        source_image: Option<Vec<u8>>,
    ) -> Result<EncodingRecord, StoreError> {
        match self.apply_one(Mutation::AddEncoding {
            person: person_id.into(),
            encoding,
            source_image,
        })? {
            Applied::Encoding(e) => Ok(e),
            other => unreachable!("add_encoding returned {other:?}"),
        }
    }

    pub fn get_encoding(&self, encoding_id: u64) -> Result<EncodingRecord, StoreError> {
        self.read()
            .encoding(encoding_id)
            .cloned()
            .ok_or_else(|| StoreError::not_found("encoding", encoding_id))
    }

    /// Every stored `(person_id, encoding)` pair in insertion order.
    pub fn all_encodings(&self) -> Vec<(u64, FaceEncoding)> {
        self.read().all_encodings()
    }

    pub fn encodings_for(&self, person_id: u64) -> Result<Vec<EncodingRecord>, StoreError> {
        let s = self.read();
        if s.person(person_id).is_none() {
            return Err(StoreError::not_found("person", person_id));
        }
        Ok(s.encodings_of(person_id).cloned().collect())
    }

    pub fn get_image(&self, image_id: u64) -> Result<ImageRecord, StoreError> {
        self.read()
            .image(image_id)
            .cloned()
            .ok_or_else(|| StoreError::not_found("image", image_id))
    }

    /// Store a memo as given; `person_id`, when set, must exist.
    pub fn add_memo(
        &self,
        person_id: Option<u64>,
        clip: AudioClip,
        created_at: Option<DateTime<Utc>>,
        label: impl Into<String>,
    ) -> Result<MemoMeta, StoreError> {
        match self.apply_one(Mutation::AddMemo {
            person: person_id.map(PersonRef::Id),
            clip,
            created_at,
            label: label.into(),
        })? {
            Applied::Memo(m) => Ok(m),
            other => unreachable!("add_memo returned {other:?}"),
        }
    }

    pub fn link_memo(&self, memo_id: u64, person_id: u64) -> Result<MemoMeta, StoreError> {
        match self.apply_one(Mutation::LinkMemo {
            memo_id,
            person: person_id.into(),
        })? {
            Applied::Memo(m) => Ok(m),
            other => unreachable!("link_memo returned {other:?}"),
        }
    }

    pub fn delete_memo(&self, memo_id: u64) -> Result<(), StoreError> {
        self.apply_one(Mutation::DeleteMemo(memo_id)).map(|_| ())
    }

    pub fn get_memo(&self, memo_id: u64) -> Result<VoiceMemo, StoreError> {
        self.read()
            .memo(memo_id)
            .ok_or_else(|| StoreError::not_found("memo", memo_id))
    }

    /// A person's memos, newest first, ties broken by higher memo id first.
    pub fn memos_for(&self, person_id: u64) -> Result<Vec<MemoMeta>, StoreError> {
        let s = self.read();
        if s.person(person_id).is_none() {
            return Err(StoreError::not_found("person", person_id));
        }
        Ok(s.memos_of(person_id))
    }

    pub fn unlinked_memos(&self) -> Vec<MemoMeta> {
        self.read().unlinked_memos()
    }

    /// Versioned, checksummed export of every table. Equal states export to
    /// identical bytes.
    pub fn export_snapshot(&self) -> Vec<u8> {
        snapshot::encode(&self.read())
    }

    /// Replace the whole store content with a snapshot.
    pub fn import_snapshot(&self, bytes: &[u8]) -> Result<(), StoreError> {
        let imported = snapshot::decode(bytes)?;
        let mut writer = self.lock_writer();
        let mut state = self.state.write().unwrap_or_else(|e| e.into_inner());
        writer.seq += 1;
        writer.replace_all(&imported)?;
        *state = imported;
        Ok(())
    }

    /// Fold the journal into a fresh checkpoint file.
    pub fn checkpoint(&self) -> Result<(), StoreError> {
        let mut writer = self.lock_writer();
        let state = self.read();
        let seq = writer.seq;
        writer.replace_all(&state)?;
        writer.seq = seq;
        Ok(())
    }
}

impl Writer {
    fn append(&mut self, entry: &Entry) -> Result<(), StoreError> {
        let record = journal::frame(entry)?;
        match &mut self.backend {
            Backend::Memory { journal } => journal.extend_from_slice(&record),
            Backend::Disk {
                journal,
                durability,
                ..
            } => {
                journal.write_all(&record)?;
                if *durability == Durability::Fsync {
                    journal.sync_data()?;
                }
            }
        }
        Ok(())
    }

    /// Persist `state` as the checkpoint at the current sequence and empty
    /// the journal.
    fn replace_all(&mut self, state: &StoreState) -> Result<(), StoreError> {
        match &mut self.backend {
            Backend::Memory { journal } => {
                journal.clear();
                journal.extend(journal::frame(&Entry {
                    seq: self.seq,
                    ops: full_state_ops(state),
                })?);
            }
            Backend::Disk { dir, journal, .. } => {
                write_checkpoint(dir, self.seq, state)?;
                *journal = reset_journal(dir)?;
            }
        }
        Ok(())
    }
}

/// Operations that rebuild `state` on an empty store (used to keep the
/// in-memory journal replayable after an import).
fn full_state_ops(state: &StoreState) -> Vec<Op> {
    let mut ops: Vec<Op> = state.persons().cloned().map(Op::PutPerson).collect();
    ops.extend(state.images().cloned().map(Op::PutImage));
    ops.extend(state.encodings().cloned().map(Op::PutEncoding));
    ops.extend(state.memos.values().cloned().map(Op::PutMemo));
    ops.push(Op::Counters(state.counters.clone()));
    ops
}

fn recover_parts(checkpoint: Option<&[u8]>, journal_bytes: &[u8]) -> Result<(u64, StoreState), StoreError> {
    let (mut seq, mut state) = match checkpoint {
        Some(b) => snapshot::decode_checkpoint(b)?,
        None => (0, StoreState::default()),
    };
    let (entries, _) = journal::scan(journal_bytes)?;
    let mut undo = Vec::new();
    for entry in entries {
        if entry.seq <= seq && checkpoint.is_some() {
            continue;
        }
        if entry.seq != seq + 1 && !(seq == 0 && checkpoint.is_none()) {
            return Err(StoreError::Journal(format!(
                "sequence jumps from {seq} to {}",
                entry.seq
            )));
        }
        for op in &entry.ops {
            state.apply(op, &mut undo);
        }
        undo.clear();
        seq = entry.seq;
    }
    Ok((seq, state))
}

fn write_checkpoint(dir: &Path, seq: u64, state: &StoreState) -> Result<(), StoreError> {
    let tmp = dir.join(format!("{CHECKPOINT_FILE}.tmp"));
    {
        let mut f = File::create(&tmp)?;
        f.write_all(&snapshot::encode_checkpoint(seq, state))?;
        f.sync_all()?;
    }
    fs::rename(&tmp, dir.join(CHECKPOINT_FILE))?;
    sync_dir(dir)?;
    Ok(())
}

fn reset_journal(dir: &Path) -> Result<File, StoreError> {
    let f = OpenOptions::new()
        .create(true)
        .write(true)
        .truncate(true)
        .open(dir.join(JOURNAL_FILE))?;
    f.sync_all()?;
    sync_dir(dir)?;
    Ok(f)
}

#[cfg(unix)]
fn sync_dir(dir: &Path) -> std::io::Result<()> {
    File::open(dir)?.sync_all()
}

#[cfg(not(unix))]
fn sync_dir(_dir: &Path) -> std::io::Result<()> {
    Ok(())
}

/// Validate and apply each mutation against the in-progress state.
fn stage(
    state: &mut StoreState,
    tx: &Transaction,
    now: DateTime<Utc>,
    ops: &mut Vec<Op>,
    undo: &mut Vec<Undo>,
) -> Result<Vec<Applied>, StoreError> {
    let mut created: Vec<Option<u64>> = Vec::with_capacity(tx.mutations.len());
    let mut applied = Vec::with_capacity(tx.mutations.len());
    for m in &tx.mutations {
        let resolve = |r: PersonRef, state: &StoreState| -> Result<u64, StoreError> {
            let id = match r {
                PersonRef::Id(id) => id,
                PersonRef::Created(i) => created
                    .get(i)
                    .copied()
                    .flatten()
                    .ok_or_else(|| StoreError::Validation(format!("mutation {i} did not create a person")))?,
            };
            if state.person(id).is_none() {
                return Err(StoreError::not_found("person", id));
            }
            Ok(id)
        };
        let (op_list, result, new_person) = match m {
            Mutation::CreatePerson(p) => {
                check_name(&p.name)?;
                let record = PersonRecord {
                    person_id: state.counters.person,
                    name: p.name.clone(),
                    relationship: p.relationship.clone(),
                    notes: p.notes.clone(),
                    created_at: now,
                    updated_at: now,
                };
                let id = record.person_id;
                (vec![Op::PutPerson(record.clone())], Applied::Person(record), Some(id))
            }
            Mutation::UpdatePerson { person, patch } => {
                let id = resolve(*person, state)?;
                let mut record = state.person(id).cloned().expect("resolved person exists");
                if let Some(name) = &patch.name {
                    check_name(name)?;
                    record.name = name.clone();
                }
                if let Some(r) = &patch.relationship {
                    record.relationship = r.clone();
                }
                if let Some(n) = &patch.notes {
                    record.notes = n.clone();
                }
                record.updated_at = now.max(record.created_at);
                (vec![Op::PutPerson(record.clone())], Applied::Person(record), None)
            }
            Mutation::DeletePerson(person) => {
                let id = resolve(*person, state)?;
                (vec![Op::DeletePerson(id)], Applied::Deleted, None)
            }
            Mutation::AddEncoding {
                person,
                encoding,
                source_image,
            } => {
                let person_id = resolve(*person, state)?;
                let mut list = Vec::new();
                let source = source_image.as_ref().map(|bytes| {
                    let image_id = state.counters.image;
                    list.push(Op::PutImage(ImageRecord {
                        image_id,
                        person_id,
                        bytes: bytes.clone(),
                        created_at: now,
                    }));
                    image_id
                });
                let record = EncodingRecord {
                    encoding_id: state.counters.encoding,
                    person_id,
                    encoding: encoding.clone(),
                    source_image: source,
                    created_at: now,
                };
                list.push(Op::PutEncoding(record.clone()));
                (list, Applied::Encoding(record), None)
            }
            Mutation::AddMemo {
                person,
                clip,
                created_at,
                label,
            } => {
                if clip.is_empty() {
                    return Err(StoreError::Validation("memo has no audio".into()));
                }
                let person_id = person.map(|p| resolve(p, state)).transpose()?;
                let row = MemoRow {
                    memo_id: state.counters.memo,
                    person_id,
                    samples: clip.samples().to_vec(),
                    created_at: created_at.unwrap_or(now),
                    label: label.clone(),
                };
                let meta = row.meta();
                (vec![Op::PutMemo(row)], Applied::Memo(meta), None)
            }
            Mutation::LinkMemo { memo_id, person } => {
                if state.memo_meta(*memo_id).is_none() {
                    return Err(StoreError::not_found("memo", *memo_id));
                }
                let person_id = resolve(*person, state)?;
                let mut meta = state.memo_meta(*memo_id).expect("checked above");
                meta.person_id = Some(person_id);
                (
                    vec![Op::LinkMemo {
                        memo_id: *memo_id,
                        person_id,
                    }],
                    Applied::Memo(meta),
                    None,
                )
            }
            Mutation::DeleteMemo(memo_id) => {
                if state.memo_meta(*memo_id).is_none() {
                    return Err(StoreError::not_found("memo", *memo_id));
                }
                (vec![Op::DeleteMemo(*memo_id)], Applied::Deleted, None)
            }
        };
        for op in &op_list {
            state.apply(op, undo);
        }
        ops.extend(op_list);
        created.push(new_person);
        applied.push(result);
    }
    Ok(applied)
}

fn check_name(name: &str) -> Result<(), StoreError> {
    if name.trim().is_empty() {
        return Err(StoreError::Validation("name must not be empty".into()));
    }
    Ok(())
}
