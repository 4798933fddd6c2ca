//! Model-based checking of the store: a naive reference implementation,
//! random transaction scripts, and crash injection at every journal offset.

use chrono::{DateTime, Duration, TimeZone, Utc};

use crate::memo::{AudioClip, MemoMeta, VoiceMemo};
use crate::rng::{Gaussian, SplitMix64};
use crate::store::{Clock, 
    Applied, Counters, EncodingRecord, ImageRecord, ManualClock, Mutation, NewPerson, PersonPatch,
    PersonRecord, PersonRef, Store, StoreError, StoreOptions, StoreState, Transaction,
};
use crate::vision::{FaceEncoding, ENCODING_DIM};

/// Outcome class compared between the store and the reference model.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Ok(Vec<Applied>),
    NotFound(&'static str, u64),
    Validation,
}

impl Outcome {
    pub fn of(result: Result<Vec<Applied>, StoreError>) -> Result<Self, String> {
        match result {
            Ok(a) => Ok(Outcome::Ok(a)),
            Err(StoreError::NotFound { entity, id }) => Ok(Outcome::NotFound(entity, id)),
            Err(StoreError::Validation(_)) => Ok(Outcome::Validation),
            Err(e) => Err(format!("unexpected store error: {e}")),
        }
    }
}

/// Straightforward copy-on-write store with the same contract: every
/// transaction runs against a clone that replaces the state only if every
/// mutation succeeds.
#[derive(Debug, Clone, PartialEq)]
#[derive(Default)]
pub struct ReferenceStore {
    pub persons: Vec<PersonRecord>,
    pub encodings: Vec<EncodingRecord>,
    pub images: Vec<ImageRecord>,
    pub memos: Vec<VoiceMemo>,
    pub next: Counters,
}

impl ReferenceStore {
    pub fn apply(&mut self, tx: &Transaction, now: DateTime<Utc>) -> Outcome {
        let mut work = self.clone();
        let mut created: Vec<Option<u64>> = Vec::new();
        let mut out = Vec::new();
        for m in &tx.mutations {
            match work.apply_one(m, now, &created) {
                Ok((applied, new_person)) => {
                    out.push(applied);
                    created.push(new_person);
                }
                Err(e) => return e,
            }
        }
        *self = work;
        Outcome::Ok(out)
    }

    fn has_person(&self, id: u64) -> bool {
        self.persons.iter().any(|p| p.person_id == id)
    }

    fn resolve(&self, r: PersonRef, created: &[Option<u64>]) -> Result<u64, Outcome> {
        let id = match r {
            PersonRef::Id(id) => id,
            PersonRef::Created(i) => created.get(i).copied().flatten().ok_or(Outcome::Validation)?,
        };
        if self.has_person(id) {
            Ok(id)
        } else {
            Err(Outcome::NotFound("person", id))
        }
    }

    fn apply_one(
        &mut self,
        m: &Mutation,
        now: DateTime<Utc>,
        created: &[Option<u64>],
    ) -> Result<(Applied, Option<u64>), Outcome> {
        match m {
            Mutation::CreatePerson(p) => {
                if p.name.trim().is_empty() {
                    return Err(Outcome::Validation);
                }
                let rec = PersonRecord {
                    person_id: self.next.person,
                    name: p.name.clone(),
                    relationship: p.relationship.clone(),
                    notes: p.notes.clone(),
                    created_at: now,
                    updated_at: now,
                };
                self.next.person += 1;
                self.persons.push(rec.clone());
                let id = rec.person_id;
                Ok((Applied::Person(rec), Some(id)))
            }
            Mutation::UpdatePerson { person, patch } => {
                let id = self.resolve(*person, created)?;
                if patch.name.as_deref().is_some_and(|n| n.trim().is_empty()) {
                    return Err(Outcome::Validation);
                }
                let rec = self.persons.iter_mut().find(|p| p.person_id == id).unwrap();
                if let Some(n) = &patch.name {
                    rec.name = n.clone();
                }
                if let Some(r) = &patch.relationship {
                    rec.relationship = r.clone();
                }
                if let Some(n) = &patch.notes {
                    rec.notes = n.clone();
                }
                rec.updated_at = if now > rec.created_at { now } else { rec.created_at };
                Ok((Applied::Person(rec.clone()), None))
            }
            Mutation::DeletePerson(person) => {
                let id = self.resolve(*person, created)?;
                self.persons.retain(|p| p.person_id != id);
                self.encodings.retain(|e| e.person_id != id);
                self.images.retain(|i| i.person_id != id);
                self.memos.retain(|m| m.person_id != Some(id));
                Ok((Applied::Deleted, None))
            }
            Mutation::AddEncoding {
                person,
                encoding,
                source_image,
            } => {
                let person_id = self.resolve(*person, created)?;
                let source = source_image.as_ref().map(|bytes| {
                    let image_id = self.next.image;
                    self.next.image += 1;
                    self.images.push(ImageRecord {
                        image_id,
                        person_id,
                        bytes: bytes.clone(),
                        created_at: now,
                    });
                    image_id
                });
                let rec = EncodingRecord {
                    encoding_id: self.next.encoding,
                    person_id,
                    encoding: encoding.clone(),
                    source_image: source,
                    created_at: now,
                };
                self.next.encoding += 1;
                self.encodings.push(rec.clone());
                Ok((Applied::Encoding(rec), None))
            }
            Mutation::AddMemo {
                person,
                clip,
                created_at,
                label,
            } => {
                if clip.is_empty() {
                    return Err(Outcome::Validation);
                }
                let person_id = match person {
                    Some(p) => Some(self.resolve(*p, created)?),
                    None => None,
                };
                let memo = VoiceMemo {
                    memo_id: self.next.memo,
                    person_id,
                    clip: clip.clone(),
                    created_at: created_at.unwrap_or(now),
                    label: label.clone(),
                };
                self.next.memo += 1;
                let meta = memo.meta();
                self.memos.push(memo);
                Ok((Applied::Memo(meta), None))
            }
            Mutation::LinkMemo { memo_id, person } => {
                if !self.memos.iter().any(|m| m.memo_id == *memo_id) {
                    return Err(Outcome::NotFound("memo", *memo_id));
                }
                let person_id = self.resolve(*person, created)?;
                let memo = self.memos.iter_mut().find(|m| m.memo_id == *memo_id).unwrap();
                memo.person_id = Some(person_id);
                Ok((Applied::Memo(memo.meta()), None))
            }
            Mutation::DeleteMemo(memo_id) => {
                let before = self.memos.len();
                self.memos.retain(|m| m.memo_id != *memo_id);
                if self.memos.len() == before {
                    return Err(Outcome::NotFound("memo", *memo_id));
                }
                Ok((Applied::Deleted, None))
            }
        }
    }

    pub fn memos_for(&self, person_id: u64) -> Vec<MemoMeta> {
        let mut v: Vec<&VoiceMemo> = self.memos.iter().filter(|m| m.person_id == Some(person_id)).collect();
        v.sort_by(|a, b| b.created_at.cmp(&a.created_at).then(b.memo_id.cmp(&a.memo_id)));
        v.into_iter().map(VoiceMemo::meta).collect()
    }

    /// Compare every table, every per-person memo list and the id counters.
    pub fn matches(&self, state: &StoreState) -> Result<(), String> {
        let persons: Vec<PersonRecord> = state.persons().cloned().collect();
        if persons != self.persons {
            return Err(format!("persons differ: store {persons:?} model {:?}", self.persons));
        }
        let encodings: Vec<EncodingRecord> = state.encodings().cloned().collect();
        if encodings != self.encodings {
            return Err("encodings differ".into());
        }
        let images: Vec<ImageRecord> = state.images().cloned().collect();
        if images != self.images {
            return Err("images differ".into());
        }
        let memos: Vec<VoiceMemo> = state.memos().collect();
        if memos != self.memos {
            return Err(format!("memos differ: store {memos:?} model {:?}", self.memos));
        }
        for p in &self.persons {
            if state.memos_of(p.person_id) != self.memos_for(p.person_id) {
                return Err(format!("memo order differs for person {}", p.person_id));
            }
            if state.encoding_count(p.person_id) != self.encodings.iter().filter(|e| e.person_id == p.person_id).count() {
                return Err(format!("encoding count differs for person {}", p.person_id));
            }
        }
        if *state.counters() != self.next {
            return Err(format!("counters differ: {:?} vs {:?}", state.counters(), self.next));
        }
        Ok(())
    }
}

pub fn epoch() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap()
}

/// One scripted step: advance the clock, then apply a transaction.
#[derive(Debug, Clone)]
pub struct Step {
    pub advance_s: i64,
    pub tx: Transaction,
}

/// Random encoding with unit norm.
pub fn random_encoding(rng: &mut SplitMix64) -> FaceEncoding {
    let mut g = Gaussian::new(rng.next_u64());
    FaceEncoding::normalized((0..ENCODING_DIM).map(|_| g.next()).collect()).expect("gaussian vector is non-zero")
}

/// A random script of `steps` transactions. Ids are drawn slightly past the
/// ones that can exist so failures (and rollbacks) are common.
pub fn random_script(seed: u64, steps: usize) -> Vec<Step> {
    let mut rng = SplitMix64::new(seed);
    let mut persons_made = 0u64;
    let mut memos_made = 0u64;
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let len = 1 + rng.below(3) as usize;
        let mut mutations = Vec::with_capacity(len);
        for pos in 0..len {
            let person_ref = |rng: &mut SplitMix64| {
                if pos > 0 && rng.below(4) == 0 {
                    PersonRef::Created(rng.below(pos as u64) as usize)
                } else {
                    PersonRef::Id(1 + rng.below(persons_made + 1))
                }
            };
            let m = match rng.below(100) {
                0..=27 => {
                    persons_made += 1;
                    let name = if rng.below(12) == 0 { String::new() } else { format!("p{}", rng.below(1000)) };
                    Mutation::CreatePerson(NewPerson::new(name).relationship(["friend", "son", ""][rng.below(3) as usize]))
                }
                28..=39 => Mutation::UpdatePerson {
                    person: person_ref(&mut rng),
                    patch: PersonPatch {
                        name: (rng.below(3) == 0).then(|| if rng.below(6) == 0 { " ".into() } else { format!("n{}", rng.below(100)) }),
                        relationship: (rng.below(2) == 0).then(|| "carer".to_string()),
                        notes: (rng.below(2) == 0).then(|| format!("note {}\nmore", rng.below(100))),
                    },
                },
                40..=49 => Mutation::DeletePerson(person_ref(&mut rng)),
                50..=64 => Mutation::AddEncoding {
                    person: person_ref(&mut rng),
                    encoding: random_encoding(&mut rng),
                    source_image: (rng.below(3) == 0).then(|| (0..rng.below(12)).map(|i| i as u8).collect()),
                },
                65..=84 => {
                    memos_made += 1;
                    let n = rng.below(24) as usize;
                    Mutation::AddMemo {
                        person: (rng.below(2) == 0).then(|| person_ref(&mut rng)),
                        clip: AudioClip::new((0..n).map(|_| rng.next_u64() as i16).collect()),
                        created_at: (rng.below(3) == 0).then(|| epoch() + Duration::seconds(rng.below(600) as i64)),
                        label: format!("m{}", rng.below(10)),
                    }
                }
                85..=93 => Mutation::LinkMemo {
                    memo_id: 1 + rng.below(memos_made + 1),
                    person: person_ref(&mut rng),
                },
                _ => Mutation::DeleteMemo(1 + rng.below(memos_made + 1)),
            };
            mutations.push(m);
        }
        out.push(Step {
            advance_s: rng.below(30) as i64,
            tx: Transaction { mutations },
        });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CrashReport {
    pub transactions: usize,
    pub committed: usize,
    pub journal_len: usize,
    pub offsets_checked: usize,
}

/// Run `script` against an in-memory store and the reference model, checking
/// every outcome and every committed state; then recover from every prefix
/// of the journal and require the state after the last complete record.
pub fn crash_check(script: &[Step]) -> Result<CrashReport, String> {
    let clock = ManualClock::new(epoch());
    let store = Store::in_memory(StoreOptions::default().with_clock(clock.clone()));
    let mut model = ReferenceStore::default();
    // (journal length, committed state) after each commit, starting empty.
    let mut commits: Vec<(usize, StoreState)> = vec![(0, StoreState::default())];

    for (i, step) in script.iter().enumerate() {
        clock.advance_secs(step.advance_s);
        let expected = model.apply(&step.tx, clock.now());
        let got = Outcome::of(store.apply_transaction(step.tx.clone()))?;
        if got != expected {
            return Err(format!("step {i}: store {got:?} model {expected:?}"));
        }
        let state = store.state();
        model.matches(&state).map_err(|e| format!("step {i}: {e}"))?;
        state.check_integrity().map_err(|e| format!("step {i}: {e}"))?;
        let len = store.journal_bytes().expect("in-memory store").len();
        if len != commits.last().unwrap().0 {
            commits.push((len, state));
        }
    }

    let journal = store.journal_bytes().expect("in-memory store");
    let mut k = 0;
    for cut in 0..=journal.len() {
        while k + 1 < commits.len() && commits[k + 1].0 <= cut {
            k += 1;
        }
        let recovered = Store::recover_state(None, &journal[..cut]).map_err(|e| format!("cut {cut}: {e}"))?;
        if recovered != commits[k].1 {
            return Err(format!("cut {cut}: recovered state is not commit {k}"));
        }
        recovered.check_integrity().map_err(|e| format!("cut {cut}: {e}"))?;
    }
    Ok(CrashReport {
        transactions: script.len(),
        committed: commits.len() - 1,
        journal_len: journal.len(),
        offsets_checked: journal.len() + 1,
    })
}
