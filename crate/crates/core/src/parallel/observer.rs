//! Hooks for watching a build from the inside. Builders report when each
//! worker starts and finishes hashing a batch and updating a row.

use std::ops::Range;
use std::sync::Mutex;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BuildEvent {
    HashBegin {
        worker: usize,
        batch: usize,
    },
    HashEnd {
        worker: usize,
        batch: usize,
    },
    /// `stage` is 0 for single-stage updates; heterogeneous builds use 1 and 2.
    UpdateBegin {
        worker: usize,
        batch: usize,
        stage: u8,
        row: usize,
        items: Range<usize>,
    },
    UpdateEnd {
        worker: usize,
        batch: usize,
        stage: u8,
        row: usize,
        items: Range<usize>,
    },
}

pub trait BuildObserver: Sync {
    fn record(&self, event: BuildEvent);
}

/// Observer that discards everything.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoObserver;

impl BuildObserver for NoObserver {
    #[inline(always)]
    fn record(&self, _event: BuildEvent) {}
}

/// Records every event in one totally ordered log. An event that happens
/// before another (across a rendezvous, say) appears earlier in the log.
#[derive(Debug, Default)]
pub struct EventLog {
    events: Mutex<Vec<BuildEvent>>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn into_events(self) -> Vec<BuildEvent> {
        self.events.into_inner().unwrap_or_else(|e| e.into_inner())
    }
}

impl BuildObserver for EventLog {
    fn record(&self, event: BuildEvent) {
        self.events.lock().unwrap_or_else(|e| e.into_inner()).push(event);
    }
}
