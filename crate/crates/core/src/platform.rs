//! Registry operations with their side effects: binding resolution,
//! automatic internal subscriptions and gated ingestion.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use parking_lot::Mutex;
use thiserror::Error;

use crate::model::{
    resolve_bindings, validate_descriptor, validate_replacement, DescriptorDoc, IdSource, Millis, ModelError,
    RandomIds, SensorUpdate, ServiceObject, StreamListing, StreamRef, Subscription, SubscriptionKind,
};
use crate::runtime::{IngestOutcome, Runtime, RuntimeError};
use crate::store::{Store, StoreError};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PlatformError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("not found: {0}")]
    NotFound(String),
    #[error(transparent)]
    Runtime(RuntimeError),
    #[error(transparent)]
    Store(StoreError),
}

impl From<StoreError> for PlatformError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(what) => PlatformError::NotFound(what),
            e => PlatformError::Store(e),
        }
    }
}

impl From<RuntimeError> for PlatformError {
    fn from(e: RuntimeError) -> Self {
        match e {
            RuntimeError::NotFound(r) => PlatformError::NotFound(r.to_string()),
            RuntimeError::Store(e) => e.into(),
            e => PlatformError::Runtime(e),
        }
    }
}

impl PlatformError {
    /// Stable machine-readable code used in API error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            PlatformError::Model(e) => e.code(),
            PlatformError::NotFound(_) => "NotFound",
            PlatformError::Runtime(RuntimeError::CompositeStream(_)) => "CompositeStream",
            PlatformError::Runtime(RuntimeError::QueueFull) => "QueueFull",
            PlatformError::Runtime(RuntimeError::Stopped) => "Stopped",
            PlatformError::Runtime(_) => "RuntimeError",
            PlatformError::Store(StoreError::BadRange { .. }) => "BadRange",
            PlatformError::Store(StoreError::Conflict(_)) => "Conflict",
            PlatformError::Store(_) => "StoreError",
        }
    }
}

pub type Result<T, E = PlatformError> = std::result::Result<T, E>;

fn now_millis() -> Millis {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as Millis)
}

pub struct Platform {
    runtime: Runtime,
    ids: Mutex<Box<dyn IdSource>>,
}

impl Platform {
    pub fn new(runtime: Runtime) -> Self {
        Self::with_ids(runtime, Box::new(RandomIds))
    }

    pub fn with_ids(runtime: Runtime, ids: Box<dyn IdSource>) -> Self {
        Self {
            runtime,
            ids: Mutex::new(ids),
        }
    }

    pub fn runtime(&self) -> &Runtime {
        &self.runtime
    }

    pub fn store(&self) -> &Arc<Store> {
        self.runtime.store()
    }

    fn next_id(&self) -> String {
        self.ids.lock().next_id()
    }

    pub fn create_so(&self, doc: DescriptorDoc) -> Result<Arc<ServiceObject>> {
        let mut created = self.create_batch(vec![(String::new(), doc)])?;
        Ok(created.pop().expect("one in, one out"))
    }

    /// Creates several descriptors at once. A source `soId` equal to the key
    /// of a batch member refers to that member, which makes cyclic wiring
    /// expressible. Either every member is validated or none is created.
    pub fn create_batch(&self, docs: Vec<(String, DescriptorDoc)>) -> Result<Vec<Arc<ServiceObject>>> {
        let now = now_millis();
        let mut sos = Vec::with_capacity(docs.len());
        for (_, doc) in &docs {
            let mut ids = self.ids.lock();
            sos.push(validate_descriptor(doc.clone(), ids.as_mut(), now)?);
        }
        let keys: HashMap<&str, String> = docs
            .iter()
            .zip(&sos)
            .filter(|((k, _), _)| !k.is_empty())
            .map(|((k, _), so)| (k.as_str(), so.id.clone()))
            .collect();
        let mut batch_streams = HashSet::new();
        for so in &mut sos {
            for spec in so.streams.values_mut() {
                if let crate::model::StreamKind::Composite(c) = &mut spec.kind {
                    for r in c.sources.values_mut() {
                        if let Some(id) = keys.get(r.so_id.as_str()) {
                            r.so_id = id.clone();
                        }
                    }
                }
            }
            batch_streams.extend(so.streams.keys().map(|s| so.stream_ref(s)));
        }
        let mut subs = Vec::new();
        for so in &sos {
            subs.push(self.internal_subscriptions(so, &batch_streams)?);
        }
        let mut out = Vec::with_capacity(sos.len());
        for (so, subs) in sos.into_iter().zip(subs) {
            let id = so.id.clone();
            out.push(self.store().create_so(so)?);
            self.store().replace_internal_subscriptions(&id, subs)?;
        }
        Ok(out)
    }

    /// One internal subscription per composite binding of `so`.
    fn internal_subscriptions(&self, so: &ServiceObject, pending: &HashSet<StreamRef>) -> Result<Vec<Subscription>> {
        let mut subs = Vec::new();
        for (name, spec) in &so.streams {
            let Some(c) = spec.composite() else { continue };
            let target = so.stream_ref(name);
            let bindings = resolve_bindings(c, |r| {
                pending.contains(r) || (r.so_id == so.id && so.streams.contains_key(&r.stream_id)) || self.store().stream_exists(r)
            })?;
            for (alias, source) in bindings {
                subs.push(Subscription {
                    id: self.next_id(),
                    source,
                    kind: SubscriptionKind::Internal {
                        target: target.clone(),
                        alias,
                    },
                });
            }
        }
        Ok(subs)
    }

    pub fn get_so(&self, id: &str) -> Result<Arc<ServiceObject>> {
        self.store().get_so(id).ok_or_else(|| PlatformError::NotFound(id.to_owned()))
    }

    pub fn list_sos(&self) -> Vec<Arc<ServiceObject>> {
        self.store().list_sos()
    }

    /// Replaces a descriptor and rewires its internal subscriptions.
    /// Subscriptions leaving streams that no longer exist are dropped.
    pub fn update_so(&self, id: &str, doc: DescriptorDoc) -> Result<Arc<ServiceObject>> {
        let existing = self.get_so(id)?;
        let so = validate_replacement(doc, &existing, now_millis())?;
        let subs = self.internal_subscriptions(&so, &HashSet::new())?;
        let removed: Vec<String> = existing
            .streams
            .keys()
            .filter(|s| !so.streams.contains_key(*s))
            .cloned()
            .collect();
        let so = self.store().update_so(so)?;
        self.store().replace_internal_subscriptions(id, subs)?;
        for stream in removed {
            for sub in self.store().subscriptions_of(&so.stream_ref(&stream)) {
                let _ = self.store().remove_subscription(&sub.id);
            }
        }
        Ok(so)
    }

    pub fn delete_so(&self, id: &str) -> Result<()> {
        self.store().delete_so(id)?;
        Ok(())
    }

    pub fn streams(&self, id: &str) -> Result<Vec<StreamListing>> {
        Ok(self.get_so(id)?.stream_listing())
    }

    /// Validates and ingests one externally supplied update.
    pub fn put_data(&self, stream: &StreamRef, su: SensorUpdate) -> Result<IngestOutcome> {
        let mut su = su.validate()?;
        if su.name.is_empty() {
            su.name = stream.stream_id.clone();
        }
        Ok(self.runtime.ingest(stream, su)?)
    }

    pub fn query(&self, stream: &StreamRef, from: Option<Millis>, to: Option<Millis>) -> Result<Vec<Arc<SensorUpdate>>> {
        self.get_so(&stream.so_id)?;
        Ok(self
            .store()
            .query_updates(stream, from.unwrap_or(0), to.unwrap_or(Millis::MAX))?)
    }

    pub fn subscribe(&self, source: &StreamRef, kind: SubscriptionKind) -> Result<Arc<Subscription>> {
        kind.check()?;
        if !self.store().stream_exists(source) {
            return Err(PlatformError::NotFound(source.to_string()));
        }
        if let SubscriptionKind::Internal { target, alias } = &kind {
            let so = self.get_so(&target.so_id)?;
            let spec = so
                .stream(&target.stream_id)
                .ok_or_else(|| PlatformError::NotFound(target.to_string()))?;
            let bad = |m: String| Err(ModelError::BadSubscription(m).into());
            match spec.composite().map(|c| c.sources.get(alias)) {
                None => return bad(format!("{target} is not a composite stream")),
                Some(None) => return bad(format!("{target} has no source alias {alias:?}")),
                Some(Some(bound)) if bound != source => {
                    return bad(format!("alias {alias:?} of {target} is bound to {bound}, not {source}"))
                }
                Some(Some(_)) => {}
            }
        }
        let sub = Subscription {
            id: self.next_id(),
            source: source.clone(),
            kind,
        };
        Ok(self.store().add_subscription(sub)?)
    }

    pub fn unsubscribe(&self, id: &str) -> Result<()> {
        self.store().remove_subscription(id)?;
        Ok(())
    }
}
