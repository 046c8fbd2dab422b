//! The dispatch runtime: ingestion gate, shared work queue, worker pool and
//! external delivery pool.
//!
//! An accepted update becomes a `Dispatch` task. Dispatching looks up the
//! origin's subscribers and fans out one `Compute` task per internal
//! subscription and one delivery per external one. A computation that
//! emits feeds a new `Dispatch` task carrying the same trace id.

mod delivery;
mod engine;
mod metrics;
mod trace;

use std::collections::VecDeque;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use crossbeam::channel::{unbounded, Receiver, Sender};
use parking_lot::Mutex;
use serde::Serialize;
use thiserror::Error;

use crate::model::{CallbackMethod, Millis, SensorUpdate, StreamRef, Subscription, SubscriptionKind};
use crate::store::{Store, StoreError};

pub use delivery::{Deliverer, DeliveryFailed, HttpDeliverer};
pub use engine::{compute_update, ComputeOutcome, Computed, FetchPolicy};
pub use metrics::{MetricsSink, StageTimings};
pub use trace::TraceReport;

use trace::{Event, Tracker};

/// Links every computation caused by one external injection.
pub type TraceId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum DiscardReason {
    Stale,
    InsufficientData,
    PreFiltered,
    PostFiltered,
    LostRace,
    CodeError,
    Unresolved,
}

impl DiscardReason {
    pub const ALL: [DiscardReason; 7] = [
        DiscardReason::Stale,
        DiscardReason::InsufficientData,
        DiscardReason::PreFiltered,
        DiscardReason::PostFiltered,
        DiscardReason::LostRace,
        DiscardReason::CodeError,
        DiscardReason::Unresolved,
    ];

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum RuntimeError {
    #[error("unknown stream {0}")]
    NotFound(StreamRef),
    #[error("{0} is a composite stream; only simple streams accept external data")]
    CompositeStream(StreamRef),
    #[error("ingestion queue is full")]
    QueueFull,
    #[error("runtime is shutting down")]
    Stopped,
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IngestOutcome {
    Accepted { trace_id: TraceId },
    StaleDiscard,
}

/// An accepted update on its way to the origin's subscribers.
#[derive(Debug, Clone)]
pub struct WorkItem {
    pub origin: StreamRef,
    pub update: Arc<SensorUpdate>,
    pub enqueue_time: Instant,
    pub trace_id: TraceId,
}

/// A per-tenant record of something that went wrong in user code or wiring.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    #[serde(rename = "soId")]
    pub so_id: String,
    pub stream: String,
    #[serde(rename = "traceId")]
    pub trace_id: TraceId,
    pub reason: DiscardReason,
    pub message: String,
}

/// Stand-in for actuation: one record per declared action per emission.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ActionRecord {
    #[serde(rename = "soId")]
    pub so_id: String,
    pub action: String,
    #[serde(rename = "traceId")]
    pub trace_id: TraceId,
    pub ts: Millis,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RuntimeStats {
    pub ingested: u64,
    #[serde(rename = "staleIngests")]
    pub stale_ingests: u64,
    pub emitted: u64,
    pub discarded: Vec<(DiscardReason, u64)>,
    pub delivered: u64,
    #[serde(rename = "deliveryFailed")]
    pub delivery_failed: u64,
}

#[derive(Debug, Clone)]
pub struct RuntimeConfig {
    pub workers: usize,
    /// Accepted-but-undispatched external updates allowed at once.
    pub queue_capacity: usize,
    pub delivery_threads: usize,
    pub callback_timeout: Duration,
    pub fetch: FetchPolicy,
    /// Keep per-trace reports (benchmarks and tests).
    pub track_traces: bool,
    pub metrics_capacity: usize,
    pub metrics_csv: Option<PathBuf>,
    /// Size of the diagnostics and action rings.
    pub log_capacity: usize,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        Self {
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            queue_capacity: 65536,
            delivery_threads: 4,
            callback_timeout: Duration::from_secs(2),
            fetch: FetchPolicy::default(),
            track_traces: false,
            metrics_capacity: 1 << 16,
            metrics_csv: None,
            log_capacity: 1024,
        }
    }
}

/// Stage timings of one emission, completed when its output stage ends.
struct PendingTiming {
    stream: StreamRef,
    trace_id: TraceId,
    queue_ns: u64,
    input_stage_ns: u64,
    compute_ns: u64,
    emitted_at: Instant,
}

impl PendingTiming {
    fn finish(self) -> StageTimings {
        StageTimings {
            trace_id: self.trace_id,
            stream: self.stream,
            queue_ns: self.queue_ns,
            input_stage_ns: self.input_stage_ns,
            compute_ns: self.compute_ns,
            output_stage_ns: self.emitted_at.elapsed().as_nanos() as u64,
        }
    }
}

/// Counts down the subscribers of one emission.
struct OutputStage {
    pending: AtomicUsize,
    timing: Mutex<Option<PendingTiming>>,
}

impl OutputStage {
    fn arrived(&self, sink: &MetricsSink) {
        if self.pending.fetch_sub(1, Ordering::AcqRel) == 1 {
            if let Some(t) = self.timing.lock().take() {
                sink.record(t.finish());
            }
        }
    }
}

enum Task {
    Dispatch {
        item: WorkItem,
        ingress: bool,
        timing: PendingTiming,
    },
    Compute {
        target: StreamRef,
        alias: String,
        item: Arc<WorkItem>,
        enqueued: Instant,
        output: Arc<OutputStage>,
    },
    Stop,
}

enum Delivery {
    Send {
        sub_id: String,
        url: String,
        method: CallbackMethod,
        body: Arc<Vec<u8>>,
        trace_id: TraceId,
        output: Arc<OutputStage>,
    },
    Stop,
}

struct Ring<T> {
    items: Mutex<VecDeque<T>>,
    cap: usize,
}

impl<T: Clone> Ring<T> {
    fn new(cap: usize) -> Self {
        Self {
            items: Mutex::new(VecDeque::new()),
            cap: cap.max(1),
        }
    }

    fn push(&self, t: T) {
        let mut items = self.items.lock();
        if items.len() == self.cap {
            items.pop_front();
        }
        items.push_back(t);
    }

    fn snapshot(&self) -> Vec<T> {
        self.items.lock().iter().cloned().collect()
    }
}

struct Counters {
    ingested: AtomicU64,
    stale_ingests: AtomicU64,
    emitted: AtomicU64,
    discarded: [AtomicU64; 7],
    delivered: AtomicU64,
    delivery_failed: AtomicU64,
}

struct Inner {
    store: Arc<Store>,
    config: RuntimeConfig,
    tasks: Sender<Task>,
    task_rx: Receiver<Task>,
    deliveries: Sender<Delivery>,
    delivery_rx: Receiver<Delivery>,
    deliverer: Arc<dyn Deliverer>,
    ingress: AtomicUsize,
    stopping: AtomicBool,
    next_trace: AtomicU64,
    tracker: Tracker,
    metrics: MetricsSink,
    diagnostics: Ring<Diagnostic>,
    actions: Ring<ActionRecord>,
    counters: Counters,
}

pub struct Runtime {
    inner: Arc<Inner>,
    threads: Mutex<Vec<JoinHandle<()>>>,
}

fn now_millis() -> Millis {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as Millis)
}

impl Runtime {
    /// Builds a runtime without starting any threads; see [`Runtime::start`].
    pub fn new(store: Arc<Store>, config: RuntimeConfig) -> std::io::Result<Self> {
        let deliverer = Arc::new(HttpDeliverer::new(config.callback_timeout));
        Self::with_deliverer(store, config, deliverer)
    }

    pub fn with_deliverer(
        store: Arc<Store>,
        config: RuntimeConfig,
        deliverer: Arc<dyn Deliverer>,
    ) -> std::io::Result<Self> {
        let metrics = match &config.metrics_csv {
            Some(p) => MetricsSink::with_csv(config.metrics_capacity, p)?,
            None => MetricsSink::new(config.metrics_capacity),
        };
        let (tasks, task_rx) = unbounded();
        let (deliveries, delivery_rx) = unbounded();
        let inner = Inner {
            store,
            tracker: Tracker::new(config.track_traces),
            diagnostics: Ring::new(config.log_capacity),
            actions: Ring::new(config.log_capacity),
            config,
            tasks,
            task_rx,
            deliveries,
            delivery_rx,
            deliverer,
            ingress: AtomicUsize::new(0),
            stopping: AtomicBool::new(false),
            next_trace: AtomicU64::new(1),
            metrics,
            counters: Counters {
                ingested: AtomicU64::new(0),
                stale_ingests: AtomicU64::new(0),
                emitted: AtomicU64::new(0),
                discarded: Default::default(),
                delivered: AtomicU64::new(0),
                delivery_failed: AtomicU64::new(0),
            },
        };
        Ok(Self {
            inner: Arc::new(inner),
            threads: Mutex::new(Vec::new()),
        })
    }

    /// Builds and starts a runtime.
    pub fn start_new(store: Arc<Store>, config: RuntimeConfig) -> std::io::Result<Self> {
        let rt = Self::new(store, config)?;
        rt.start();
        Ok(rt)
    }

    /// Spawns the configured workers and delivery threads.
    pub fn start(&self) {
        let mut threads = self.threads.lock();
        if !threads.is_empty() {
            return;
        }
        for i in 0..self.inner.config.workers.max(1) {
            let inner = self.inner.clone();
            threads.push(
                std::thread::Builder::new()
                    .name(format!("sf-worker-{i}"))
                    .spawn(move || inner.work())
                    .expect("spawn worker"),
            );
        }
        for i in 0..self.inner.config.delivery_threads.max(1) {
            let inner = self.inner.clone();
            threads.push(
                std::thread::Builder::new()
                    .name(format!("sf-deliver-{i}"))
                    .spawn(move || inner.deliver_loop())
                    .expect("spawn delivery thread"),
            );
        }
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.inner.store
    }

    pub fn config(&self) -> &RuntimeConfig {
        &self.inner.config
    }

    /// Opens a trace that stays incomplete until [`Runtime::close_trace`],
    /// so several ingests can share it.
    pub fn open_trace(&self) -> TraceId {
        let id = self.inner.next_trace.fetch_add(1, Ordering::Relaxed);
        self.inner.tracker.open(id);
        id
    }

    pub fn close_trace(&self, trace: TraceId) {
        self.inner.tracker.release(trace);
    }

    /// Gates `su` into the simple stream `origin` under a fresh trace.
    pub fn ingest(&self, origin: &StreamRef, su: SensorUpdate) -> Result<IngestOutcome, RuntimeError> {
        let trace = self.open_trace();
        let res = self.ingest_in(trace, origin, su);
        self.close_trace(trace);
        res
    }

    /// Gates `su` into `origin` as part of an already open trace.
    pub fn ingest_in(
        &self,
        trace: TraceId,
        origin: &StreamRef,
        su: SensorUpdate,
    ) -> Result<IngestOutcome, RuntimeError> {
        let inner = &self.inner;
        if inner.stopping.load(Ordering::SeqCst) {
            return Err(RuntimeError::Stopped);
        }
        let so = inner
            .store
            .get_so(&origin.so_id)
            .ok_or_else(|| RuntimeError::NotFound(origin.clone()))?;
        match so.stream(&origin.stream_id) {
            None => return Err(RuntimeError::NotFound(origin.clone())),
            Some(s) if s.is_composite() => return Err(RuntimeError::CompositeStream(origin.clone())),
            Some(_) => {}
        }
        let cap = inner.config.queue_capacity;
        if inner
            .ingress
            .fetch_update(Ordering::AcqRel, Ordering::Acquire, |n| (n < cap).then_some(n + 1))
            .is_err()
        {
            return Err(RuntimeError::QueueFull);
        }
        let enqueue_time = Instant::now();
        let update = Arc::new(su.clone());
        let appended = match inner.store.append_update(origin, su) {
            Ok(a) => a,
            Err(e) => {
                inner.ingress.fetch_sub(1, Ordering::AcqRel);
                return Err(match e {
                    StoreError::NotFound(_) => RuntimeError::NotFound(origin.clone()),
                    e => e.into(),
                });
            }
        };
        if !appended.accepted() {
            inner.ingress.fetch_sub(1, Ordering::AcqRel);
            inner.counters.stale_ingests.fetch_add(1, Ordering::Relaxed);
            return Ok(IngestOutcome::StaleDiscard);
        }
        inner.counters.ingested.fetch_add(1, Ordering::Relaxed);
        inner.enqueue(Task::Dispatch {
            timing: PendingTiming {
                stream: origin.clone(),
                trace_id: trace,
                queue_ns: 0,
                input_stage_ns: 0,
                compute_ns: 0,
                emitted_at: enqueue_time,
            },
            item: WorkItem {
                origin: origin.clone(),
                update,
                enqueue_time,
                trace_id: trace,
            },
            ingress: true,
        });
        Ok(IngestOutcome::Accepted { trace_id: trace })
    }

    /// Queued plus in-flight tasks, deliveries included.
    pub fn outstanding(&self) -> usize {
        self.inner.tracker.outstanding()
    }

    /// Waits until nothing is queued or in flight.
    pub fn wait_quiescent(&self, timeout: Duration) -> bool {
        self.inner.tracker.wait_idle(timeout)
    }

    /// Waits for `trace` to complete and takes its report. `None` when
    /// trace tracking is off, the trace is unknown, or the wait timed out.
    pub fn wait_trace(&self, trace: TraceId, timeout: Duration) -> Option<TraceReport> {
        self.inner.tracker.wait_trace(trace, timeout)
    }

    pub fn tracks_traces(&self) -> bool {
        self.inner.tracker.tracking()
    }

    pub fn metrics(&self) -> &MetricsSink {
        &self.inner.metrics
    }

    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        self.inner.diagnostics.snapshot()
    }

    pub fn actions(&self) -> Vec<ActionRecord> {
        self.inner.actions.snapshot()
    }

    pub fn stats(&self) -> RuntimeStats {
        let c = &self.inner.counters;
        RuntimeStats {
            ingested: c.ingested.load(Ordering::Relaxed),
            stale_ingests: c.stale_ingests.load(Ordering::Relaxed),
            emitted: c.emitted.load(Ordering::Relaxed),
            discarded: DiscardReason::ALL
                .iter()
                .map(|r| (*r, c.discarded[r.index()].load(Ordering::Relaxed)))
                .collect(),
            delivered: c.delivered.load(Ordering::Relaxed),
            delivery_failed: c.delivery_failed.load(Ordering::Relaxed),
        }
    }

    /// Rejects new ingests, lets everything already accepted propagate,
    /// then stops all threads. Idempotent.
    pub fn shutdown(&self) {
        let inner = &self.inner;
        inner.stopping.store(true, Ordering::SeqCst);
        let mut threads = self.threads.lock();
        if threads.is_empty() {
            return;
        }
        while !inner.tracker.wait_idle(Duration::from_secs(1)) {}
        for _ in 0..inner.config.workers.max(1) {
            let _ = inner.tasks.send(Task::Stop);
        }
        for _ in 0..inner.config.delivery_threads.max(1) {
            let _ = inner.deliveries.send(Delivery::Stop);
        }
        for t in threads.drain(..) {
            let _ = t.join();
        }
    }
}

impl Drop for Runtime {
    fn drop(&mut self) {
        self.shutdown();
    }
}

impl Inner {
    fn enqueue(&self, task: Task) {
        let trace = match &task {
            Task::Dispatch { item, .. } => item.trace_id,
            Task::Compute { item, .. } => item.trace_id,
            Task::Stop => unreachable!(),
        };
        self.tracker.task_added(trace);
        self.tasks.send(task).expect("task queue open while runtime alive");
    }

    fn work(&self) {
        while let Ok(task) = self.task_rx.recv() {
            match task {
                Task::Stop => break,
                Task::Dispatch { item, ingress, timing } => {
                    let trace = item.trace_id;
                    if ingress {
                        self.ingress.fetch_sub(1, Ordering::AcqRel);
                    }
                    self.dispatch(item, ingress, timing);
                    self.tracker.task_done(trace);
                }
                Task::Compute {
                    target,
                    alias,
                    item,
                    enqueued,
                    output,
                } => {
                    let queue_ns = enqueued.elapsed().as_nanos() as u64;
                    output.arrived(&self.metrics);
                    self.compute(target, &alias, &item, queue_ns);
                    self.tracker.task_done(item.trace_id);
                }
            }
        }
    }

    fn dispatch(&self, item: WorkItem, ingress: bool, mut timing: PendingTiming) {
        if ingress {
            timing.queue_ns = item.enqueue_time.elapsed().as_nanos() as u64;
        }
        let subs = self.store.subscriptions_of(&item.origin);
        if subs.is_empty() {
            self.metrics.record(timing.finish());
            return;
        }
        let output = Arc::new(OutputStage {
            pending: AtomicUsize::new(subs.len()),
            timing: Mutex::new(Some(timing)),
        });
        let item = Arc::new(item);
        let mut body: Option<Arc<Vec<u8>>> = None;
        for sub in subs {
            match &sub.kind {
                SubscriptionKind::Internal { target, alias } => self.enqueue(Task::Compute {
                    target: target.clone(),
                    alias: alias.clone(),
                    item: item.clone(),
                    enqueued: Instant::now(),
                    output: output.clone(),
                }),
                SubscriptionKind::External { callback_url, method } => {
                    let body = body
                        .get_or_insert_with(|| Arc::new(serde_json::to_vec(&*item.update).expect("update serializes")))
                        .clone();
                    self.schedule_delivery(&sub, callback_url, *method, body, item.trace_id, output.clone());
                }
            }
        }
    }

    fn schedule_delivery(
        &self,
        sub: &Subscription,
        url: &str,
        method: CallbackMethod,
        body: Arc<Vec<u8>>,
        trace_id: TraceId,
        output: Arc<OutputStage>,
    ) {
        self.tracker.task_added(trace_id);
        self.deliveries
            .send(Delivery::Send {
                sub_id: sub.id.clone(),
                url: url.to_owned(),
                method,
                body,
                trace_id,
                output,
            })
            .expect("delivery queue open while runtime alive");
    }

    fn deliver_loop(&self) {
        while let Ok(d) = self.delivery_rx.recv() {
            let Delivery::Send {
                sub_id,
                url,
                method,
                body,
                trace_id,
                output,
            } = d
            else {
                break;
            };
            let res = self.deliverer.deliver(&url, method, &body);
            output.arrived(&self.metrics);
            match &res {
                Ok(()) => {
                    self.counters.delivered.fetch_add(1, Ordering::Relaxed);
                }
                Err(e) => {
                    self.counters.delivery_failed.fetch_add(1, Ordering::Relaxed);
                    log::warn!("subscription {sub_id}: {e}");
                }
            }
            self.tracker.event(trace_id, Event::Delivered(res.is_ok()));
            self.tracker.task_done(trace_id);
        }
    }

    fn compute(&self, target: StreamRef, alias: &str, item: &WorkItem, queue_ns: u64) {
        let c = compute_update(&self.store, &target, alias, &item.update, self.config.fetch);
        match c.outcome {
            ComputeOutcome::Emitted(su) => {
                let emitted_at = Instant::now();
                self.counters.emitted.fetch_add(1, Ordering::Relaxed);
                self.tracker.event(item.trace_id, Event::Emitted(target.clone()));
                self.trigger_actions(&target, item.trace_id);
                self.enqueue(Task::Dispatch {
                    timing: PendingTiming {
                        stream: target.clone(),
                        trace_id: item.trace_id,
                        queue_ns,
                        input_stage_ns: c.input_ns,
                        compute_ns: c.compute_ns,
                        emitted_at,
                    },
                    item: WorkItem {
                        origin: target,
                        update: su,
                        enqueue_time: emitted_at,
                        trace_id: item.trace_id,
                    },
                    ingress: false,
                });
            }
            ComputeOutcome::Discarded { reason, detail } => {
                self.counters.discarded[reason.index()].fetch_add(1, Ordering::Relaxed);
                if let Some(message) = detail {
                    log::debug!("{target} discarded ({reason:?}): {message}");
                    self.diagnostics.push(Diagnostic {
                        so_id: target.so_id.clone(),
                        stream: target.stream_id.clone(),
                        trace_id: item.trace_id,
                        reason,
                        message,
                    });
                }
                self.tracker.event(item.trace_id, Event::Discarded(target, reason));
            }
        }
    }

    fn trigger_actions(&self, target: &StreamRef, trace_id: TraceId) {
        let Some(so) = self.store.get_so(&target.so_id) else {
            return;
        };
        for action in &so.actions {
            let rec = ActionRecord {
                so_id: so.id.clone(),
                action: action.clone(),
                trace_id,
                ts: now_millis(),
            };
            log::info!(target: "streamflow::actions", "{}", serde_json::to_string(&rec).unwrap_or_default());
            self.actions.push(rec);
        }
    }
}
