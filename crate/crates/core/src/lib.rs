//! Face recognition engine for assistive recall: detection, encoding and
//! matching, a voice memo pipeline, a journaled person store, profile
//! retrieval and an evaluation harness.

pub mod engine;
pub mod eval;
pub mod ingestion;
pub mod memo;
pub mod retrieval;
pub mod rng;
pub mod store;
pub mod vision;
