//! Committed table state and the journaled operations that change it.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::records::{EncodingRecord, ImageRecord, MemoRow, PersonRecord};
use crate::memo::{MemoMeta, VoiceMemo};
use crate::vision::FaceEncoding;

/// Next id to hand out per table. Ids are never reused, so these only grow.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub person: u64,
    pub encoding: u64,
    pub image: u64,
    pub memo: u64,
}

impl Default for Counters {
    fn default() -> Self {
        Self {
            person: 1,
            encoding: 1,
            image: 1,
            memo: 1,
        }
    }
}

/// A resolved mutation as written to the journal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) enum Op {
    PutPerson(PersonRecord),
    DeletePerson(u64),
    PutImage(ImageRecord),
    PutEncoding(EncodingRecord),
    PutMemo(MemoRow),
    LinkMemo { memo_id: u64, person_id: u64 },
    DeleteMemo(u64),
    /// Raise id counters to at least these values.
    Counters(Counters),
}

/// Prior value of a row touched by an uncommitted operation.
pub(crate) enum Undo {
    Person(u64, Option<PersonRecord>),
    Encoding(u64, Option<EncodingRecord>),
    Image(u64, Option<ImageRecord>),
    Memo(u64, Option<MemoRow>),
}

/// The full content of a store: persons, encodings, images and memos.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StoreState {
    pub(crate) counters: Counters,
    pub(crate) persons: BTreeMap<u64, PersonRecord>,
    pub(crate) encodings: BTreeMap<u64, EncodingRecord>,
    pub(crate) images: BTreeMap<u64, ImageRecord>,
    pub(crate) memos: BTreeMap<u64, MemoRow>,
    enc_by_person: HashMap<u64, BTreeSet<u64>>,
    img_by_person: HashMap<u64, BTreeSet<u64>>,
    memo_by_person: HashMap<u64, BTreeSet<u64>>,
}

fn index_insert(index: &mut HashMap<u64, BTreeSet<u64>>, owner: u64, id: u64) {
    index.entry(owner).or_default().insert(id);
}

fn index_remove(index: &mut HashMap<u64, BTreeSet<u64>>, owner: u64, id: u64) {
    if let Some(set) = index.get_mut(&owner) {
        set.remove(&id);
        if set.is_empty() {
            index.remove(&owner);
        }
    }
}

impl StoreState {
    pub(crate) fn from_rows(
        counters: Counters,
        persons: Vec<PersonRecord>,
        encodings: Vec<EncodingRecord>,
        images: Vec<ImageRecord>,
        memos: Vec<MemoRow>,
    ) -> Self {
        let mut s = Self {
            counters,
            ..Self::default()
        };
        for p in persons {
            s.set_person(p.person_id, Some(p));
        }
        for i in images {
            s.set_image(i.image_id, Some(i));
        }
        for e in encodings {
            s.set_encoding(e.encoding_id, Some(e));
        }
        for m in memos {
            s.set_memo(m.memo_id, Some(m));
        }
        s
    }

    // Reads.

    pub fn counters(&self) -> &Counters {
        &self.counters
    }

    pub fn person(&self, id: u64) -> Option<&PersonRecord> {
        self.persons.get(&id)
    }

    pub fn persons(&self) -> impl Iterator<Item = &PersonRecord> {
        self.persons.values()
    }

    pub fn encoding(&self, id: u64) -> Option<&EncodingRecord> {
        self.encodings.get(&id)
    }

    /// Every encoding in insertion order.
    pub fn encodings(&self) -> impl Iterator<Item = &EncodingRecord> {
        self.encodings.values()
    }

    pub fn encodings_of(&self, person_id: u64) -> impl Iterator<Item = &EncodingRecord> {
        self.enc_by_person
            .get(&person_id)
            .into_iter()
            .flatten()
            .map(|id| &self.encodings[id])
    }

    pub fn encoding_count(&self, person_id: u64) -> usize {
        self.enc_by_person.get(&person_id).map_or(0, BTreeSet::len)
    }

    pub fn image(&self, id: u64) -> Option<&ImageRecord> {
        self.images.get(&id)
    }

    pub fn images(&self) -> impl Iterator<Item = &ImageRecord> {
        self.images.values()
    }

    pub fn memo(&self, id: u64) -> Option<VoiceMemo> {
        self.memos.get(&id).map(MemoRow::to_memo)
    }

    pub fn memo_meta(&self, id: u64) -> Option<MemoMeta> {
        self.memos.get(&id).map(MemoRow::meta)
    }

    /// Every memo, in id order.
    pub fn memos(&self) -> impl Iterator<Item = VoiceMemo> + '_ {
        self.memos.values().map(MemoRow::to_memo)
    }

    /// A person's memos, newest first (ties by memo id, descending).
    pub fn memos_of(&self, person_id: u64) -> Vec<MemoMeta> {
        let rows = self
            .memo_by_person
            .get(&person_id)
            .into_iter()
            .flatten()
            .map(|id| &self.memos[id]);
        newest_first(rows)
    }

    pub fn unlinked_memos(&self) -> Vec<MemoMeta> {
        newest_first(self.memos.values().filter(|m| m.person_id.is_none()))
    }

    pub fn all_encodings(&self) -> Vec<(u64, FaceEncoding)> {
        self.encodings
            .values()
            .map(|e| (e.person_id, e.encoding.clone()))
            .collect()
    }

    /// Every encoding and linked memo refers to a stored person, every
    /// index agrees with its table, and counters exceed every id in use.
    pub fn check_integrity(&self) -> Result<(), String> {
        for e in self.encodings.values() {
            if !self.persons.contains_key(&e.person_id) {
                return Err(format!("encoding {} owned by missing person {}", e.encoding_id, e.person_id));
            }
            if let Some(img) = e.source_image {
                if !self.images.contains_key(&img) {
                    return Err(format!("encoding {} refers to missing image {img}", e.encoding_id));
                }
            }
        }
        for i in self.images.values() {
            if !self.persons.contains_key(&i.person_id) {
                return Err(format!("image {} owned by missing person {}", i.image_id, i.person_id));
            }
        }
        for m in self.memos.values() {
            if let Some(p) = m.person_id {
                if !self.persons.contains_key(&p) {
                    return Err(format!("memo {} linked to missing person {p}", m.memo_id));
                }
            }
        }
        let max = |it: &mut dyn Iterator<Item = u64>| it.max().unwrap_or(0);
        let c = &self.counters;
        if c.person <= max(&mut self.persons.keys().copied())
            || c.encoding <= max(&mut self.encodings.keys().copied())
            || c.image <= max(&mut self.images.keys().copied())
            || c.memo <= max(&mut self.memos.keys().copied())
        {
            return Err("id counter behind stored ids".into());
        }
        let rebuilt = Self::from_rows(
            c.clone(),
            self.persons.values().cloned().collect(),
            self.encodings.values().cloned().collect(),
            self.images.values().cloned().collect(),
            self.memos.values().cloned().collect(),
        );
        if rebuilt.enc_by_person != self.enc_by_person
            || rebuilt.img_by_person != self.img_by_person
            || rebuilt.memo_by_person != self.memo_by_person
        {
            return Err("secondary index out of sync".into());
        }
        Ok(())
    }

    // Writes.

    /// Apply one operation, recording prior row values in `undo`.
    pub(crate) fn apply(&mut self, op: &Op, undo: &mut Vec<Undo>) {
        match op {
            Op::PutPerson(p) => {
                let old = self.set_person(p.person_id, Some(p.clone()));
                undo.push(Undo::Person(p.person_id, old));
            }
            Op::DeletePerson(id) => {
                let encs: Vec<u64> = self.enc_by_person.get(id).into_iter().flatten().copied().collect();
                for e in encs {
                    let old = self.set_encoding(e, None);
                    undo.push(Undo::Encoding(e, old));
                }
                let imgs: Vec<u64> = self.img_by_person.get(id).into_iter().flatten().copied().collect();
                for i in imgs {
                    let old = self.set_image(i, None);
                    undo.push(Undo::Image(i, old));
                }
                let memos: Vec<u64> = self.memo_by_person.get(id).into_iter().flatten().copied().collect();
                for m in memos {
                    let old = self.set_memo(m, None);
                    undo.push(Undo::Memo(m, old));
                }
                let old = self.set_person(*id, None);
                undo.push(Undo::Person(*id, old));
            }
            Op::PutImage(i) => {
                let old = self.set_image(i.image_id, Some(i.clone()));
                undo.push(Undo::Image(i.image_id, old));
            }
            Op::PutEncoding(e) => {
                let old = self.set_encoding(e.encoding_id, Some(e.clone()));
                undo.push(Undo::Encoding(e.encoding_id, old));
            }
            Op::PutMemo(m) => {
                let old = self.set_memo(m.memo_id, Some(m.clone()));
                undo.push(Undo::Memo(m.memo_id, old));
            }
            Op::LinkMemo { memo_id, person_id } => {
                if let Some(mut row) = self.memos.get(memo_id).cloned() {
                    row.person_id = Some(*person_id);
                    let old = self.set_memo(*memo_id, Some(row));
                    undo.push(Undo::Memo(*memo_id, old));
                }
            }
            Op::DeleteMemo(id) => {
                let old = self.set_memo(*id, None);
                undo.push(Undo::Memo(*id, old));
            }
            Op::Counters(c) => {
                let own = &mut self.counters;
                own.person = own.person.max(c.person);
                own.encoding = own.encoding.max(c.encoding);
                own.image = own.image.max(c.image);
                own.memo = own.memo.max(c.memo);
            }
        }
    }

    /// Revert operations applied since `undo` was empty.
    pub(crate) fn rollback(&mut self, undo: Vec<Undo>, counters: Counters) {
        for u in undo.into_iter().rev() {
            match u {
                Undo::Person(id, old) => {
                    self.set_person(id, old);
                }
                Undo::Encoding(id, old) => {
                    self.set_encoding(id, old);
                }
                Undo::Image(id, old) => {
                    self.set_image(id, old);
                }
                Undo::Memo(id, old) => {
                    self.set_memo(id, old);
                }
            }
        }
        self.counters = counters;
    }

    fn set_person(&mut self, id: u64, row: Option<PersonRecord>) -> Option<PersonRecord> {
        match row {
            Some(p) => {
                self.counters.person = self.counters.person.max(id + 1);
                self.persons.insert(id, p)
            }
            None => self.persons.remove(&id),
        }
    }

    fn set_encoding(&mut self, id: u64, row: Option<EncodingRecord>) -> Option<EncodingRecord> {
        let old = self.encodings.remove(&id);
        if let Some(o) = &old {
            index_remove(&mut self.enc_by_person, o.person_id, id);
        }
        if let Some(e) = row {
            self.counters.encoding = self.counters.encoding.max(id + 1);
            index_insert(&mut self.enc_by_person, e.person_id, id);
            self.encodings.insert(id, e);
        }
        old
    }

    fn set_image(&mut self, id: u64, row: Option<ImageRecord>) -> Option<ImageRecord> {
        let old = self.images.remove(&id);
        if let Some(o) = &old {
            index_remove(&mut self.img_by_person, o.person_id, id);
        }
        if let Some(i) = row {
            self.counters.image = self.counters.image.max(id + 1);
            index_insert(&mut self.img_by_person, i.person_id, id);
            self.images.insert(id, i);
        }
        old
    }

    fn set_memo(&mut self, id: u64, row: Option<MemoRow>) -> Option<MemoRow> {
        let old = self.memos.remove(&id);
        if let Some(p) = old.as_ref().and_then(|o| o.person_id) {
            index_remove(&mut self.memo_by_person, p, id);
        }
        if let Some(m) = row {
            self.counters.memo = self.counters.memo.max(id + 1);
            if let Some(p) = m.person_id {
                index_insert(&mut self.memo_by_person, p, id);
            }
            self.memos.insert(id, m);
        }
        old
    }
}

fn newest_first<'a>(rows: impl Iterator<Item = &'a MemoRow>) -> Vec<MemoMeta> {
    let mut rows: Vec<&MemoRow> = rows.collect();
    rows.sort_by(|a, b| b.created_at.cmp(&a.created_at).then(b.memo_id.cmp(&a.memo_id)));
    rows.into_iter().map(MemoRow::meta).collect()
}
