//! Descriptor registry, subscriptions and per-stream update logs.
//!
//! Every stream has its own log behind its own mutex, so the timestamp gate
//! is a linearizable compare-and-append per stream and unrelated streams
//! never contend. Registry mutations take a single write lock.

mod file;
mod log;

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use indexmap::IndexMap;
use parking_lot::{Mutex, RwLock};
use thiserror::Error;

use crate::model::{Millis, SensorUpdate, ServiceObject, StreamRef, Subscription, SubscriptionKind};

use file::{read_complete_lines, Journal, RegistryRecord};
use log::StreamLog;

pub use log::{AppendOutcome, Appended};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum StoreError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("already exists: {0}")]
    Conflict(String),
    #[error("bad range: from {from} is after to {to}")]
    BadRange { from: Millis, to: Millis },
    #[error("i/o error: {0}")]
    Io(String),
    #[error("corrupt store: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, Default)]
pub struct StoreConfig {
    /// Keep at most this many updates per stream (oldest evicted first).
    /// The gate is unaffected by eviction. `None` keeps everything.
    pub max_entries_per_stream: Option<usize>,
}

#[derive(Default)]
struct Registry {
    sos: IndexMap<String, Arc<ServiceObject>>,
    subs: IndexMap<String, Arc<Subscription>>,
    by_source: HashMap<StreamRef, Vec<Arc<Subscription>>>,
    journal: Option<Journal>,
}

impl Registry {
    fn record(&mut self, rec: RegistryRecord) -> Result<(), StoreError> {
        match &mut self.journal {
            Some(j) => j.record(&rec),
            None => Ok(()),
        }
    }

    fn insert_sub(&mut self, sub: Arc<Subscription>) {
        self.by_source.entry(sub.source.clone()).or_default().push(sub.clone());
        self.subs.insert(sub.id.clone(), sub);
    }

    fn drop_sub(&mut self, id: &str) -> Option<Arc<Subscription>> {
        let sub = self.subs.shift_remove(id)?;
        if let Some(list) = self.by_source.get_mut(&sub.source) {
            list.retain(|s| s.id != id);
            if list.is_empty() {
                self.by_source.remove(&sub.source);
            }
        }
        Some(sub)
    }

    /// Subscriptions leaving or entering any stream of `so_id`.
    fn subs_touching(&self, so_id: &str) -> Vec<String> {
        self.subs
            .values()
            .filter(|s| {
                s.source.so_id == so_id
                    || matches!(&s.kind, SubscriptionKind::Internal { target, .. } if target.so_id == so_id)
            })
            .map(|s| s.id.clone())
            .collect()
    }
}

type LogSlot = Arc<Mutex<StreamLog>>;

pub struct Store {
    registry: RwLock<Registry>,
    logs: RwLock<HashMap<StreamRef, LogSlot>>,
    config: StoreConfig,
    fetches: AtomicU64,
}

impl Store {
    pub fn open_memory(config: StoreConfig) -> Self {
        Self {
            registry: RwLock::new(Registry::default()),
            logs: RwLock::new(HashMap::new()),
            config,
            fetches: AtomicU64::new(0),
        }
    }

    /// Opens (or creates) a file-backed store rooted at `root`, replaying
    /// whatever a previous process left behind.
    pub fn open_dir(root: &Path, config: StoreConfig) -> Result<Self, StoreError> {
        let (journal, records) = Journal::open(root)?;
        let store = Self::open_memory(config);
        {
            let mut reg = store.registry.write();
            for rec in records {
                match rec {
                    RegistryRecord::PutSo { so } => {
                        let so = ServiceObject::from_stored(so).map_err(|e| StoreError::Corrupt(e.to_string()))?;
                        reg.sos.insert(so.id.clone(), Arc::new(so));
                    }
                    RegistryRecord::DeleteSo { id } => {
                        reg.sos.shift_remove(&id);
                    }
                    RegistryRecord::PutSub { sub } => reg.insert_sub(Arc::new(sub)),
                    RegistryRecord::DeleteSub { id } => {
                        reg.drop_sub(&id);
                    }
                }
            }
            let mut logs = store.logs.write();
            for so in reg.sos.values() {
                for stream in so.streams.keys() {
                    let r = so.stream_ref(stream);
                    let mut log = StreamLog::new(store.config.max_entries_per_stream);
                    for (i, line) in read_complete_lines(&journal.stream_path(&r))?.iter().enumerate() {
                        let su: SensorUpdate = serde_json::from_str(line)
                            .map_err(|e| StoreError::Corrupt(format!("{r} line {}: {e}", i + 1)))?;
                        if su.last_update > log.last_timestamp() || log.len() == 0 {
                            log.push(su);
                        }
                    }
                    log.file = Some(journal.open_stream(&r)?);
                    logs.insert(r, Arc::new(Mutex::new(log)));
                }
            }
            reg.journal = Some(journal);
        }
        Ok(store)
    }

    fn new_log(&self, reg: &Registry, r: &StreamRef) -> Result<LogSlot, StoreError> {
        let mut log = StreamLog::new(self.config.max_entries_per_stream);
        if let Some(j) = &reg.journal {
            j.remove_stream(r)?;
            log.file = Some(j.open_stream(r)?);
        }
        Ok(Arc::new(Mutex::new(log)))
    }

    fn retire_log(&self, reg: &Registry, r: &StreamRef) -> Result<(), StoreError> {
        if let Some(slot) = self.logs.write().remove(r) {
            let mut log = slot.lock();
            log.deleted = true;
            log.file = None;
        }
        if let Some(j) = &reg.journal {
            j.remove_stream(r)?;
        }
        Ok(())
    }

    pub fn create_so(&self, so: ServiceObject) -> Result<Arc<ServiceObject>, StoreError> {
        let mut reg = self.registry.write();
        if reg.sos.contains_key(&so.id) {
            return Err(StoreError::Conflict(so.id));
        }
        reg.record(RegistryRecord::PutSo { so: so.to_document() })?;
        let mut fresh = Vec::new();
        for stream in so.streams.keys() {
            let r = so.stream_ref(stream);
            fresh.push((r.clone(), self.new_log(&reg, &r)?));
        }
        self.logs.write().extend(fresh);
        let so = Arc::new(so);
        reg.sos.insert(so.id.clone(), so.clone());
        Ok(so)
    }

    /// Replaces a descriptor. Logs of streams that survive are kept; logs of
    /// removed streams are dropped and new streams start empty.
    pub fn update_so(&self, so: ServiceObject) -> Result<Arc<ServiceObject>, StoreError> {
        let mut reg = self.registry.write();
        let old = reg.sos.get(&so.id).cloned().ok_or_else(|| StoreError::NotFound(so.id.clone()))?;
        reg.record(RegistryRecord::PutSo { so: so.to_document() })?;
        for stream in old.streams.keys().filter(|s| !so.streams.contains_key(*s)) {
            self.retire_log(&reg, &old.stream_ref(stream))?;
        }
        for stream in so.streams.keys().filter(|s| !old.streams.contains_key(*s)) {
            let r = so.stream_ref(stream);
            let slot = self.new_log(&reg, &r)?;
            self.logs.write().insert(r, slot);
        }
        let so = Arc::new(so);
        reg.sos.insert(so.id.clone(), so.clone());
        Ok(so)
    }

    /// Removes a descriptor, its logs and every subscription from or to it.
    /// Returns the removed subscriptions.
    pub fn delete_so(&self, id: &str) -> Result<Vec<Arc<Subscription>>, StoreError> {
        let mut reg = self.registry.write();
        let so = reg.sos.get(id).cloned().ok_or_else(|| StoreError::NotFound(id.to_owned()))?;
        let mut removed = Vec::new();
        for sid in reg.subs_touching(id) {
            reg.record(RegistryRecord::DeleteSub { id: sid.clone() })?;
            removed.extend(reg.drop_sub(&sid));
        }
        reg.record(RegistryRecord::DeleteSo { id: id.to_owned() })?;
        reg.sos.shift_remove(id);
        for stream in so.streams.keys() {
            self.retire_log(&reg, &so.stream_ref(stream))?;
        }
        Ok(removed)
    }

    pub fn get_so(&self, id: &str) -> Option<Arc<ServiceObject>> {
        self.registry.read().sos.get(id).cloned()
    }

    /// All descriptors in creation order.
    pub fn list_sos(&self) -> Vec<Arc<ServiceObject>> {
        self.registry.read().sos.values().cloned().collect()
    }

    pub fn stream_exists(&self, r: &StreamRef) -> bool {
        self.logs.read().contains_key(r)
    }

    /// Swaps the internal subscriptions targeting streams of `target_so`
    /// for `subs`, in one registry step.
    pub fn replace_internal_subscriptions(
        &self,
        target_so: &str,
        subs: Vec<Subscription>,
    ) -> Result<(), StoreError> {
        let mut reg = self.registry.write();
        let stale: Vec<String> = reg
            .subs
            .values()
            .filter(|s| matches!(&s.kind, SubscriptionKind::Internal { target, .. } if target.so_id == target_so))
            .map(|s| s.id.clone())
            .collect();
        for id in stale {
            reg.record(RegistryRecord::DeleteSub { id: id.clone() })?;
            reg.drop_sub(&id);
        }
        for sub in subs {
            reg.record(RegistryRecord::PutSub { sub: sub.clone() })?;
            reg.insert_sub(Arc::new(sub));
        }
        Ok(())
    }

    pub fn add_subscription(&self, sub: Subscription) -> Result<Arc<Subscription>, StoreError> {
        let mut reg = self.registry.write();
        if reg.subs.contains_key(&sub.id) {
            return Err(StoreError::Conflict(sub.id));
        }
        if !self.stream_exists(&sub.source) {
            return Err(StoreError::NotFound(sub.source.to_string()));
        }
        reg.record(RegistryRecord::PutSub { sub: sub.clone() })?;
        let sub = Arc::new(sub);
        reg.insert_sub(sub.clone());
        Ok(sub)
    }

    pub fn remove_subscription(&self, id: &str) -> Result<Arc<Subscription>, StoreError> {
        let mut reg = self.registry.write();
        if !reg.subs.contains_key(id) {
            return Err(StoreError::NotFound(id.to_owned()));
        }
        reg.record(RegistryRecord::DeleteSub { id: id.to_owned() })?;
        Ok(reg.drop_sub(id).expect("checked above"))
    }

    pub fn get_subscription(&self, id: &str) -> Option<Arc<Subscription>> {
        self.registry.read().subs.get(id).cloned()
    }

    /// Subscriptions whose source is `r`, in insertion order.
    pub fn subscriptions_of(&self, r: &StreamRef) -> Vec<Arc<Subscription>> {
        self.registry.read().by_source.get(r).cloned().unwrap_or_default()
    }

    pub fn subscription_count(&self) -> usize {
        self.registry.read().subs.len()
    }

    fn slot(&self, r: &StreamRef) -> Result<LogSlot, StoreError> {
        self.logs
            .read()
            .get(r)
            .cloned()
            .ok_or_else(|| StoreError::NotFound(r.to_string()))
    }

    /// Compare-timestamp-and-append. Stale updates are reported, not errors.
    pub fn append_update(&self, r: &StreamRef, su: SensorUpdate) -> Result<Appended, StoreError> {
        let slot = self.slot(r)?;
        let mut log = slot.lock();
        if log.deleted {
            return Err(StoreError::NotFound(r.to_string()));
        }
        log.append(su)
    }

    /// Newest accepted update, `None` for an empty stream.
    pub fn last_update(&self, r: &StreamRef) -> Result<Option<Arc<SensorUpdate>>, StoreError> {
        self.fetches.fetch_add(1, Ordering::Relaxed);
        Ok(self.slot(r)?.lock().last())
    }

    /// Newest accepted timestamp, 0 for an empty stream.
    pub fn last_timestamp(&self, r: &StreamRef) -> Result<Millis, StoreError> {
        Ok(self.slot(r)?.lock().last_timestamp())
    }

    /// Updates with `from <= lastUpdate <= to`, oldest first.
    pub fn query_updates(&self, r: &StreamRef, from: Millis, to: Millis) -> Result<Vec<Arc<SensorUpdate>>, StoreError> {
        if from > to {
            return Err(StoreError::BadRange { from, to });
        }
        Ok(self.slot(r)?.lock().range(from, to))
    }

    /// Number of `last_update` calls served so far.
    pub fn fetch_count(&self) -> u64 {
        self.fetches.load(Ordering::Relaxed)
    }
}
