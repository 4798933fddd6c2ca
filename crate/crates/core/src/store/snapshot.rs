//! Versioned, checksummed full-state exports.
//!
//! Layout: `"MFRSSNAP"`, version `u32 LE`, body length `u64 LE`, bincode
//! body, CRC-32 of the body `u32 LE`.

use serde::{Deserialize, Serialize};

use super::records::{EncodingRecord, ImageRecord, MemoRow, PersonRecord};
use super::tables::{Counters, StoreState};
use super::StoreError;

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"MFRSSNAP";
pub const SNAPSHOT_VERSION: u32 = 1;
const HEADER: usize = 8 + 4 + 8;

/// On-disk checkpoint: `"MFRSCKPT"`, journal sequence `u64 LE`, CRC-32 of
/// the sequence bytes, then a snapshot.
const CHECKPOINT_MAGIC: &[u8; 8] = b"MFRSCKPT";

#[derive(Serialize, Deserialize)]
struct Body {
    counters: Counters,
    persons: Vec<PersonRecord>,
    encodings: Vec<EncodingRecord>,
    images: Vec<ImageRecord>,
    memos: Vec<MemoRow>,
}

pub(crate) fn encode(state: &StoreState) -> Vec<u8> {
    let body = Body {
        counters: state.counters.clone(),
        persons: state.persons.values().cloned().collect(),
        encodings: state.encodings.values().cloned().collect(),
        images: state.images.values().cloned().collect(),
        memos: state.memos.values().cloned().collect(),
    };
    let body = bincode::serialize(&body).expect("in-memory serialization cannot fail");
    let mut out = Vec::with_capacity(HEADER + body.len() + 4);
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    out.extend_from_slice(&(body.len() as u64).to_le_bytes());
    out.extend_from_slice(&body);
    out.extend_from_slice(&crc32fast::hash(&body).to_le_bytes());
    out
}

pub(crate) fn decode(bytes: &[u8]) -> Result<StoreState, StoreError> {
    let corrupt = |m: &str| StoreError::CorruptSnapshot(m.to_string());
    if bytes.len() < HEADER || &bytes[..8] != SNAPSHOT_MAGIC {
        return Err(corrupt("missing snapshot signature"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != SNAPSHOT_VERSION {
        return Err(StoreError::UnsupportedVersion(version));
    }
    let len = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    if len != (bytes.len() - HEADER).saturating_sub(4) as u64 || bytes.len() < HEADER + 4 {
        return Err(corrupt("length does not match payload"));
    }
    let body = &bytes[HEADER..bytes.len() - 4];
    let crc = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
    if crc32fast::hash(body) != crc {
        return Err(corrupt("checksum mismatch"));
    }
    let body: Body = bincode::deserialize(body).map_err(|e| corrupt(&e.to_string()))?;
    let state = StoreState::from_rows(body.counters, body.persons, body.encodings, body.images, body.memos);
    state.check_integrity().map_err(|e| corrupt(&e))?;
    Ok(state)
}

pub(crate) fn encode_checkpoint(seq: u64, state: &StoreState) -> Vec<u8> {
    let mut out = CHECKPOINT_MAGIC.to_vec();
    out.extend_from_slice(&seq.to_le_bytes());
    out.extend_from_slice(&crc32fast::hash(&seq.to_le_bytes()).to_le_bytes());
    out.extend(encode(state));
    out
}

pub(crate) fn decode_checkpoint(bytes: &[u8]) -> Result<(u64, StoreState), StoreError> {
    if bytes.len() < 20 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(StoreError::CorruptSnapshot("missing checkpoint signature".into()));
    }
    let seq_bytes: [u8; 8] = bytes[8..16].try_into().unwrap();
    let crc = u32::from_le_bytes(bytes[16..20].try_into().unwrap());
    if crc32fast::hash(&seq_bytes) != crc {
        return Err(StoreError::CorruptSnapshot("checkpoint sequence checksum mismatch".into()));
    }
    Ok((u64::from_le_bytes(seq_bytes), decode(&bytes[20..])?))
}
