//! Write-ahead journal framing: `[len u32 LE][crc32 u32 LE][payload]` per
//! committed transaction.

use serde::{Deserialize, Serialize};

use super::tables::Op;
use super::StoreError;

pub(crate) const FRAME_HEADER: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Entry {
    pub seq: u64,
    pub ops: Vec<Op>,
}

pub(crate) fn frame(entry: &Entry) -> Result<Vec<u8>, StoreError> {
    let payload = bincode::serialize(entry).map_err(|e| StoreError::Journal(e.to_string()))?;
    let len = u32::try_from(payload.len())
        .map_err(|_| StoreError::Validation("transaction too large for one journal record".into()))?;
    let mut out = Vec::with_capacity(FRAME_HEADER + payload.len());
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    out.extend_from_slice(&payload);
    Ok(out)
}

/// Intact records from the start of `bytes`, and the length they cover.
/// Scanning stops at the first short, torn or checksum-failing record.
pub(crate) fn scan(bytes: &[u8]) -> Result<(Vec<Entry>, usize), StoreError> {
    let mut entries = Vec::new();
    let mut pos = 0;
    while bytes.len() - pos >= FRAME_HEADER {
        let len = u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize;
        let crc = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap());
        let start = pos + FRAME_HEADER;
        if bytes.len() - start < len {
            break;
        }
        let payload = &bytes[start..start + len];
        if crc32fast::hash(payload) != crc {
            break;
        }
        let entry: Entry = bincode::deserialize(payload)
            .map_err(|e| StoreError::Journal(format!("record at offset {pos}: {e}")))?;
        entries.push(entry);
        pos = start + len;
    }
    Ok((entries, pos))
}
