//! Memo association contexts keyed by the client's session header.

use std::collections::HashMap;
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use mfrs_core::memo::CaptureContext;

pub const DEFAULT_SESSION: &str = "default";

pub struct Sessions {
    template: CaptureContext,
    contexts: Mutex<HashMap<String, CaptureContext>>,
}

impl Sessions {
    /// `initial` seeds the default session; other sessions start empty with
    /// the same association window.
    pub fn new(initial: CaptureContext) -> Self {
        let mut template = initial.clone();
        template.last_enrollment = None;
        let mut contexts = HashMap::new();
        contexts.insert(DEFAULT_SESSION.to_string(), initial);
        Self {
            template,
            contexts: Mutex::new(contexts),
        }
    }

    pub fn get(&self, session: &str) -> CaptureContext {
        let map = self.contexts.lock().unwrap_or_else(|e| e.into_inner());
        map.get(session).cloned().unwrap_or_else(|| self.template.clone())
    }

    pub fn enrolled(&self, session: &str, person_id: u64, at: DateTime<Utc>) {
        let mut map = self.contexts.lock().unwrap_or_else(|e| e.into_inner());
        map.entry(session.to_string())
            .or_insert_with(|| self.template.clone())
            .enrolled(person_id, at);
    }
}
