//! The per-target computation: fetch, gate, filter, transform, store.

use std::sync::Arc;
use std::time::Instant;

use crate::expr::{BindingSet, FilterError};
use crate::model::{
    ChannelValue, CompositeStreamSpec, Millis, SensorUpdate, StreamRef, RESERVED_PREVIOUS, RESERVED_RESULT,
};
use crate::par::Execution;
use crate::store::{Store, StoreError};

use super::DiscardReason;

/// What happened to one triggered computation.
#[derive(Debug, Clone, PartialEq)]
pub enum ComputeOutcome {
    Emitted(Arc<SensorUpdate>),
    Discarded {
        reason: DiscardReason,
        /// Human-readable detail for the owning tenant, when there is one.
        detail: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Computed {
    pub outcome: ComputeOutcome,
    pub input_ns: u64,
    pub compute_ns: u64,
}

/// How input-stage fetches are issued.
#[derive(Debug, Clone, Copy)]
pub struct FetchPolicy {
    pub execution: Execution,
    /// Fetch lists shorter than this run inline on the worker.
    pub parallel_min: usize,
}

impl Default for FetchPolicy {
    fn default() -> Self {
        Self {
            execution: Execution::default(),
            parallel_min: 32,
        }
    }
}

fn discard(reason: DiscardReason, detail: Option<String>) -> ComputeOutcome {
    ComputeOutcome::Discarded { reason, detail }
}

fn nanos(since: Instant) -> u64 {
    since.elapsed().as_nanos() as u64
}

/// Computes a new update for the composite stream `target`, triggered by
/// `received` arriving from the operand bound to `alias`.
pub fn compute_update(
    store: &Store,
    target: &StreamRef,
    alias: &str,
    received: &Arc<SensorUpdate>,
    fetch: FetchPolicy,
) -> Computed {
    let t0 = Instant::now();
    let unresolved = |detail: String| Computed {
        outcome: discard(DiscardReason::Unresolved, Some(detail)),
        input_ns: nanos(t0),
        compute_ns: 0,
    };
    let Some(so) = store.get_so(&target.so_id) else {
        return unresolved(format!("UnknownSource: target {target} no longer exists"));
    };
    let Some(spec) = so.stream(&target.stream_id).and_then(|s| s.composite()) else {
        return unresolved(format!("UnknownSource: {target} is not a composite stream"));
    };
    if !spec.sources.contains_key(alias) {
        return unresolved(format!("UnknownSource: {target} has no source alias {alias:?}"));
    }

    // (a) input stage
    let mut wanted: Vec<(&str, &StreamRef)> = vec![(RESERVED_PREVIOUS, target)];
    wanted.extend(
        spec.sources
            .iter()
            .filter(|(a, _)| a.as_str() != alias)
            .map(|(a, r)| (a.as_str(), r)),
    );
    let exec = if wanted.len() >= fetch.parallel_min {
        fetch.execution
    } else {
        Execution::Sequential
    };
    let fetched = exec.map(&wanted, |(_, r)| store.last_update(r));
    let input_ns = nanos(t0);

    let mut inputs: Vec<(&str, Arc<SensorUpdate>)> = Vec::with_capacity(wanted.len() + 1);
    for ((a, r), res) in wanted.iter().zip(fetched) {
        match res {
            Ok(Some(su)) => inputs.push((a, su)),
            Ok(None) => {}
            Err(StoreError::NotFound(_)) => {
                return Computed {
                    outcome: discard(DiscardReason::Unresolved, Some(format!("UnknownSource: {a:?} -> {r}"))),
                    input_ns,
                    compute_ns: 0,
                }
            }
            Err(e) => {
                return Computed {
                    outcome: discard(DiscardReason::Unresolved, Some(e.to_string())),
                    input_ns,
                    compute_ns: 0,
                }
            }
        }
    }

    let t1 = Instant::now();
    let outcome = transform(store, target, spec, alias, received, &inputs);
    Computed {
        outcome,
        input_ns,
        compute_ns: nanos(t1),
    }
}

/// Stages (b) through (g).
fn transform(
    store: &Store,
    target: &StreamRef,
    spec: &CompositeStreamSpec,
    alias: &str,
    received: &Arc<SensorUpdate>,
    inputs: &[(&str, Arc<SensorUpdate>)],
) -> ComputeOutcome {
    // (b) consistency gate
    let previous = inputs.iter().find(|(a, _)| *a == RESERVED_PREVIOUS).map(|(_, su)| su);
    if previous.is_some_and(|p| received.last_update <= p.last_update) {
        return discard(DiscardReason::Stale, None);
    }

    let mut binding = BindingSet::new();
    binding.bind(alias, received);
    for (a, su) in inputs {
        binding.bind(a, su);
    }

    // (c) missing data
    let missing: Vec<&str> = spec
        .referenced_aliases()
        .into_iter()
        .filter(|a| *a != RESERVED_RESULT && !binding.contains(a))
        .collect();
    if !missing.is_empty() {
        return discard(
            DiscardReason::InsufficientData,
            Some(format!("no data yet for {}", missing.join(", "))),
        );
    }

    // (d) pre-filter
    if let Some(pre) = &spec.pre_filter {
        match pre.evaluate_filter(&binding) {
            Ok(true) => {}
            Ok(false) => return discard(DiscardReason::PreFiltered, None),
            Err(e) => return discard(DiscardReason::PreFiltered, Some(filter_detail("pre-filter", &e))),
        }
    }

    // (e) transform
    let mut channels = Vec::with_capacity(spec.channels.len());
    for (name, ch) in &spec.channels {
        let value = match ch.value.evaluate(&binding) {
            Ok(v) => v,
            Err(e) => return discard(DiscardReason::CodeError, Some(format!("channel {name:?}: {e}"))),
        };
        if let Err(e) = value.check_emittable() {
            return discard(DiscardReason::CodeError, Some(format!("channel {name:?}: {e}")));
        }
        let mut cv = ChannelValue::new(name.clone(), value);
        cv.unit = ch.unit.clone();
        channels.push(cv);
    }
    let last_update: Millis = inputs
        .iter()
        .map(|(_, su)| su.last_update)
        .fold(received.last_update, Millis::max);
    let candidate = SensorUpdate::new(target.stream_id.clone(), last_update, channels);

    // (f) post-filters
    let with_result = binding.with(RESERVED_RESULT, &candidate);
    for (name, ch) in &spec.channels {
        if let Some(post) = &ch.post_filter {
            match post.evaluate_filter(&with_result) {
                Ok(true) => {}
                Ok(false) => return discard(DiscardReason::PostFiltered, None),
                Err(e) => {
                    return discard(
                        DiscardReason::PostFiltered,
                        Some(filter_detail(&format!("post-filter of {name:?}"), &e)),
                    )
                }
            }
        }
    }

    // (g) store
    match store.append_update(target, candidate.clone()) {
        Ok(a) if a.accepted() => ComputeOutcome::Emitted(Arc::new(candidate)),
        Ok(_) => discard(DiscardReason::LostRace, None),
        Err(e) => discard(DiscardReason::Unresolved, Some(e.to_string())),
    }
}

fn filter_detail(which: &str, e: &FilterError) -> String {
    format!("{which}: {e}")
}
