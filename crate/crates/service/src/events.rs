//! Recognition event fan-out with resumable per-subscriber cursors.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

use mfrs_core::retrieval::RecognitionOutcome;
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast;

pub const DEFAULT_HISTORY: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecognitionEvent {
    pub event_id: u64,
    pub outcome: RecognitionOutcome,
}

struct History {
    next_id: u64,
    events: VecDeque<Arc<RecognitionEvent>>,
}

/// Numbers events from 1 and keeps the most recent ones for replay.
pub struct EventHub {
    history: Mutex<History>,
    capacity: usize,
    live: broadcast::Sender<Arc<RecognitionEvent>>,
}

impl EventHub {
    pub fn new(capacity: usize) -> Self {
        let capacity = capacity.max(1);
        Self {
            history: Mutex::new(History {
                next_id: 1,
                events: VecDeque::with_capacity(capacity),
            }),
            capacity,
            live: broadcast::channel(capacity).0,
        }
    }

    pub fn publish(&self, outcome: RecognitionOutcome) -> Arc<RecognitionEvent> {
        let mut h = self.history.lock().unwrap_or_else(|e| e.into_inner());
        let event = Arc::new(RecognitionEvent {
            event_id: h.next_id,
            outcome,
        });
        h.next_id += 1;
        if h.events.len() == self.capacity {
            h.events.pop_front();
        }
        h.events.push_back(event.clone());
        // Sent under the lock so a concurrent subscribe sees each event
        // either in its backlog or on its receiver, never both or neither.
        let _ = self.live.send(event.clone());
        event
    }

    /// Retained events newer than `after` plus a receiver for later ones.
    /// Without a cursor only future events are delivered.
    pub fn subscribe(
        &self,
        after: Option<u64>,
    ) -> (Vec<Arc<RecognitionEvent>>, broadcast::Receiver<Arc<RecognitionEvent>>) {
        let h = self.history.lock().unwrap_or_else(|e| e.into_inner());
        let backlog = match after {
            Some(last) => h.events.iter().filter(|e| e.event_id > last).cloned().collect(),
            None => Vec::new(),
        };
        (backlog, self.live.subscribe())
    }

    pub fn last_event_id(&self) -> Option<u64> {
        let h = self.history.lock().unwrap_or_else(|e| e.into_inner());
        (h.next_id > 1).then(|| h.next_id - 1)
    }

    /// Stream of events after `after`, each delivered once and in order. A
    /// subscriber that falls behind the live channel is resynchronised from
    /// the retained history.
    pub fn stream(
        self: Arc<Self>,
        after: Option<u64>,
    ) -> impl futures::Stream<Item = Arc<RecognitionEvent>> + Send + 'static {
        let (backlog, rx) = self.subscribe(after);
        let state = Cursor {
            hub: self,
            backlog: backlog.into(),
            rx,
            last: after,
        };
        futures::stream::unfold(state, |mut s| async move {
            loop {
                if let Some(e) = s.backlog.pop_front() {
                    if s.last.is_some_and(|l| e.event_id <= l) {
                        continue;
                    }
                    s.last = Some(e.event_id);
                    return Some((e, s));
                }
                match s.rx.recv().await {
                    Ok(e) => s.backlog.push_back(e),
                    Err(broadcast::error::RecvError::Lagged(_)) => {
                        let (backlog, rx) = s.hub.subscribe(Some(s.last.unwrap_or(0)));
                        s.backlog = backlog.into();
                        s.rx = rx;
                    }
                    Err(broadcast::error::RecvError::Closed) => return None,
                }
            }
        })
    }
}

struct Cursor {
    hub: Arc<EventHub>,
    backlog: VecDeque<Arc<RecognitionEvent>>,
    rx: broadcast::Receiver<Arc<RecognitionEvent>>,
    last: Option<u64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use futures::StreamExt;

    fn outcome() -> RecognitionOutcome {
        RecognitionOutcome {
            faces: vec![],
            timestamp: "2024-01-01T00:00:00Z".parse().unwrap(),
        }
    }

    fn ids(events: &[Arc<RecognitionEvent>]) -> Vec<u64> {
        events.iter().map(|e| e.event_id).collect()
    }

    #[test]
    fn ids_increase_from_one() {
        let hub = EventHub::new(8);
        assert_eq!(hub.last_event_id(), None);
        assert_eq!(hub.publish(outcome()).event_id, 1);
        assert_eq!(hub.publish(outcome()).event_id, 2);
        assert_eq!(hub.last_event_id(), Some(2));
    }

    #[test]
    fn replay_after_cursor_and_bounded_history() {
        let hub = EventHub::new(3);
        for _ in 0..5 {
            hub.publish(outcome());
        }
        assert_eq!(ids(&hub.subscribe(Some(3)).0), vec![4, 5]);
        assert_eq!(ids(&hub.subscribe(Some(0)).0), vec![3, 4, 5]);
        assert!(hub.subscribe(None).0.is_empty());
    }

    #[tokio::test]
    async fn resumed_stream_has_no_gaps_or_duplicates() {
        let hub = Arc::new(EventHub::new(64));
        for _ in 0..3 {
            hub.publish(outcome());
        }
        let mut s = Box::pin(hub.clone().stream(Some(1)));
        hub.publish(outcome());
        let got: Vec<u64> = (&mut s).take(3).map(|e| e.event_id).collect().await;
        assert_eq!(got, vec![2, 3, 4]);

        let publisher = {
            let hub = hub.clone();
            tokio::spawn(async move {
                for _ in 0..50 {
                    hub.publish(outcome());
                    tokio::task::yield_now().await;
                }
            })
        };
        let got: Vec<u64> = s.take(50).map(|e| e.event_id).collect().await;
        publisher.await.unwrap();
        assert_eq!(got, (5..55).collect::<Vec<_>>());
    }

    #[tokio::test]
    async fn lagging_subscriber_resyncs_from_history() {
        let hub = Arc::new(EventHub::new(4));
        let mut s = Box::pin(hub.clone().stream(Some(0)));
        // Overflow the live channel before the subscriber polls.
        for _ in 0..10 {
            hub.publish(outcome());
        }
        let first = s.next().await.unwrap().event_id;
        // Events 1..=6 fell out of both channel and history; delivery resumes
        // at the oldest retained one and stays gap-free from there.
        assert_eq!(first, 7);
        let rest: Vec<u64> = s.take(3).map(|e| e.event_id).collect().await;
        assert_eq!(rest, vec![8, 9, 10]);
    }
}
