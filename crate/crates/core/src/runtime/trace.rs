//! Outstanding-work accounting: global quiescence and per-trace completion.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use parking_lot::{Condvar, Mutex};

use crate::model::StreamRef;

use super::{DiscardReason, TraceId};

/// Everything observed for one trace, available once it has completed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceReport {
    pub trace_id: TraceId,
    /// Composite streams that emitted, in emission order.
    pub emissions: Vec<StreamRef>,
    pub discards: Vec<(StreamRef, DiscardReason)>,
    pub delivered: usize,
    pub delivery_failed: usize,
    /// From trace open to the completion of its last task.
    pub elapsed: Duration,
}

impl TraceReport {
    pub fn discard_count(&self, reason: DiscardReason) -> usize {
        self.discards.iter().filter(|(_, r)| *r == reason).count()
    }

    /// Stale plus LostRace: every arrival rejected by a timestamp gate.
    pub fn gate_discards(&self) -> usize {
        self.discard_count(DiscardReason::Stale) + self.discard_count(DiscardReason::LostRace)
    }

    pub fn discards_by_reason(&self) -> BTreeMap<DiscardReason, usize> {
        let mut m = BTreeMap::new();
        for (_, r) in &self.discards {
            *m.entry(*r).or_default() += 1;
        }
        m
    }
}

struct Open {
    outstanding: usize,
    started: Instant,
    report: TraceReport,
}

pub(crate) enum Event {
    Emitted(StreamRef),
    Discarded(StreamRef, DiscardReason),
    Delivered(bool),
}

#[derive(Default)]
struct Traces {
    open: HashMap<TraceId, Open>,
    done: HashMap<TraceId, TraceReport>,
}

pub(crate) struct Tracker {
    outstanding: AtomicUsize,
    idle_lock: Mutex<()>,
    idle: Condvar,
    /// `None` when per-trace tracking is off.
    traces: Option<Mutex<Traces>>,
    trace_done: Condvar,
}

impl Tracker {
    pub(crate) fn new(track: bool) -> Self {
        Self {
            outstanding: AtomicUsize::new(0),
            idle_lock: Mutex::new(()),
            idle: Condvar::new(),
            traces: track.then(Default::default),
            trace_done: Condvar::new(),
        }
    }

    pub(crate) fn tracking(&self) -> bool {
        self.traces.is_some()
    }

    /// Registers a hold on `trace` so it cannot complete until released.
    pub(crate) fn open(&self, trace: TraceId) {
        if let Some(t) = &self.traces {
            let mut t = t.lock();
            t.open
                .entry(trace)
                .or_insert_with(|| Open {
                    outstanding: 0,
                    started: Instant::now(),
                    report: TraceReport {
                        trace_id: trace,
                        ..Default::default()
                    },
                })
                .outstanding += 1;
        }
    }

    pub(crate) fn task_added(&self, trace: TraceId) {
        self.outstanding.fetch_add(1, Ordering::SeqCst);
        self.open(trace);
    }

    /// Releases one hold or task on `trace`.
    pub(crate) fn release(&self, trace: TraceId) {
        if let Some(t) = &self.traces {
            let mut t = t.lock();
            let finished = match t.open.get_mut(&trace) {
                Some(o) => {
                    o.outstanding -= 1;
                    o.outstanding == 0
                }
                None => false,
            };
            if finished {
                let o = t.open.remove(&trace).expect("present");
                let mut report = o.report;
                report.elapsed = o.started.elapsed();
                t.done.insert(trace, report);
                self.trace_done.notify_all();
            }
        }
    }

    pub(crate) fn task_done(&self, trace: TraceId) {
        self.release(trace);
        if self.outstanding.fetch_sub(1, Ordering::SeqCst) == 1 {
            let _g = self.idle_lock.lock();
            self.idle.notify_all();
        }
    }

    pub(crate) fn event(&self, trace: TraceId, ev: Event) {
        if let Some(t) = &self.traces {
            let mut t = t.lock();
            if let Some(o) = t.open.get_mut(&trace) {
                let r = &mut o.report;
                match ev {
                    Event::Emitted(s) => r.emissions.push(s),
                    Event::Discarded(s, why) => r.discards.push((s, why)),
                    Event::Delivered(true) => r.delivered += 1,
                    Event::Delivered(false) => r.delivery_failed += 1,
                }
            }
        }
    }

    pub(crate) fn outstanding(&self) -> usize {
        self.outstanding.load(Ordering::SeqCst)
    }

    pub(crate) fn wait_idle(&self, timeout: Duration) -> bool {
        let deadline = Instant::now() + timeout;
        let mut g = self.idle_lock.lock();
        while self.outstanding() > 0 {
            if self.idle.wait_until(&mut g, deadline).timed_out() {
                return self.outstanding() == 0;
            }
        }
        true
    }

    /// Blocks until `trace` completes and takes its report.
    pub(crate) fn wait_trace(&self, trace: TraceId, timeout: Duration) -> Option<TraceReport> {
        let t = self.traces.as_ref()?;
        let deadline = Instant::now() + timeout;
        let mut g = t.lock();
        loop {
            if let Some(r) = g.done.remove(&trace) {
                return Some(r);
            }
            if !g.open.contains_key(&trace) {
                return None;
            }
            if self.trace_done.wait_until(&mut g, deadline).timed_out() {
                return g.done.remove(&trace);
            }
        }
    }
}
