//! Store stress timing: insert, get and update latency.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::storecheck::random_encoding;
use super::EvalError;
use crate::memo::nearest_rank;
use crate::rng::SplitMix64;
use crate::store::{Mutation, NewPerson, PersonPatch, PersonRef, Store, Transaction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub p50_us: f64,
    pub p95_us: f64,
    pub p99_us: f64,
    /// Raw per-operation timings in execution order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub samples_us: Vec<f64>,
}

impl LatencyStats {
    /// Nearest-rank percentiles of `samples_us`.
    pub fn from_samples(samples_us: Vec<f64>) -> Self {
        Self {
            p50_us: nearest_rank(&samples_us, 50.0),
            p95_us: nearest_rank(&samples_us, 95.0),
            p99_us: nearest_rank(&samples_us, 99.0),
            samples_us,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbBenchReport {
    pub n: usize,
    pub insert: LatencyStats,
    pub get: LatencyStats,
    pub update: LatencyStats,
    pub total_ms: f64,
}

impl DbBenchReport {
    pub fn without_samples(mut self) -> Self {
        for s in [&mut self.insert, &mut self.get, &mut self.update] {
            s.samples_us.clear();
        }
        self
    }
}

/// Insert `n` persons with one encoding each (one transaction per person),
/// then `n` gets and `n` updates of random persons, timing each operation.
pub fn bench_db(n: usize, store: &Store, seed: u64) -> Result<DbBenchReport, EvalError> {
    if n == 0 {
        return Err(EvalError::InvalidParams("n must be at least 1".into()));
    }
    if !store.list_persons().is_empty() {
        return Err(EvalError::InvalidParams("bench_db needs an empty store".into()));
    }
    let mut rng = SplitMix64::new(seed);
    let total = Instant::now();
    let micros = |start: Instant| start.elapsed().as_secs_f64() * 1e6;

    let mut ids = Vec::with_capacity(n);
    let mut insert = Vec::with_capacity(n);
    for i in 0..n {
        let tx = Transaction::new()
            .push(Mutation::CreatePerson(NewPerson::new(format!("bench {i}")).relationship("bench")))
            .push(Mutation::AddEncoding {
                person: PersonRef::Created(0),
                encoding: random_encoding(&mut rng),
                source_image: None,
            });
        let start = Instant::now();
        let applied = store.apply_transaction(tx)?;
        insert.push(micros(start));
        if let crate::store::Applied::Person(p) = &applied[0] {
            ids.push(p.person_id);
        }
    }

    let mut get = Vec::with_capacity(n);
    for _ in 0..n {
        let id = ids[rng.below(ids.len() as u64) as usize];
        let start = Instant::now();
        let p = store.get_person(id)?;
        get.push(micros(start));
        std::hint::black_box(p);
    }

    let mut update = Vec::with_capacity(n);
    for i in 0..n {
        let id = ids[rng.below(ids.len() as u64) as usize];
        let patch = PersonPatch {
            notes: Some(format!("update {i}")),
            ..PersonPatch::default()
        };
        let start = Instant::now();
        store.update_person(id, patch)?;
        update.push(micros(start));
    }

    Ok(DbBenchReport {
        n,
        insert: LatencyStats::from_samples(insert),
        get: LatencyStats::from_samples(get),
        update: LatencyStats::from_samples(update),
        total_ms: total.elapsed().as_secs_f64() * 1e3,
    })
}
