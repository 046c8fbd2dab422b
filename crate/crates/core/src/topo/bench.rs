use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use serde::Serialize;

use std::sync::Arc;

use crate::model::{ChannelValue, SensorUpdate, StreamRef, Value};
use crate::platform::Platform;
use crate::runtime::{IngestOutcome, Runtime, RuntimeConfig, TraceId, TraceReport};
use crate::store::{Store, StoreConfig};

use super::stats::{mean, median, percentile};
use super::{
    deploy, derive_execution_tree, generate_family, Deployment, Family, TopoError, TopologySpec, CHANNEL, STREAM,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BenchMode {
    /// Injections start at a fixed global rate regardless of completion.
    Paced { per_second: f64 },
    /// Each injection starts once the previous one has fully propagated.
    Serial,
}

impl BenchMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            BenchMode::Paced { .. } => "paced",
            BenchMode::Serial => "serial",
        }
    }
}

/// Which sources one injection feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Injection {
    /// Every source, in one trace.
    AllSources,
    /// A single source, cycling through them in node order.
    #[default]
    RoundRobin,
}

impl Injection {
    pub fn as_str(&self) -> &'static str {
        match self {
            Injection::AllSources => "all",
            Injection::RoundRobin => "round-robin",
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    /// Label written to reports (`length`, `in`, ...).
    pub family: String,
    pub size: usize,
    pub injections: usize,
    pub mode: BenchMode,
    pub injection: Injection,
    /// Per-injection bound on reaching completion.
    pub deadline: Duration,
}

/// Stage timings of one emission, attributed to its topology node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StageSample {
    pub node: String,
    pub in_degree: usize,
    pub out_degree: usize,
    pub trace_id: TraceId,
    pub queue_ns: u64,
    pub input_stage_ns: u64,
    pub compute_ns: u64,
    pub output_stage_ns: u64,
}

impl StageSample {
    fn stage(&self, stage: &str) -> u64 {
        match stage {
            "queue" => self.queue_ns,
            "input" => self.input_stage_ns,
            "compute" => self.compute_ns,
            _ => self.output_stage_ns,
        }
    }
}

const STAGES: [&str; 4] = ["queue", "input", "compute", "output"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub family: String,
    pub size: usize,
    pub mode: String,
    pub injections: usize,
    /// Per injection: from the first ingest until its trace completed.
    pub end_to_end_ns: Vec<u64>,
    pub samples: Vec<StageSample>,
    /// Injections whose execution window overlapped no other and were
    /// therefore checked against the execution-tree oracle.
    pub verified: usize,
    pub violations: Vec<String>,
    /// Store fetches issued during the run.
    pub fetches: u64,
}

impl BenchReport {
    pub fn median_end_to_end(&self) -> f64 {
        median(&self.end_to_end_ns)
    }
}

fn su(ts: u64, v: f64) -> SensorUpdate {
    SensorUpdate::new(STREAM, ts, vec![ChannelValue::new(CHANNEL, Value::Number(v))])
}

/// Drives `injections` updates into the sources of a deployed topology
/// and checks each isolated injection against the execution-tree oracle.
///
/// Injection `k` (0-based) carries value `k` and timestamp `k + 2`, so it
/// is fresh against the priming data and every earlier injection.
pub fn run_benchmark(
    spec: &TopologySpec,
    platform: &Platform,
    deployment: &Deployment,
    cfg: &BenchConfig,
) -> Result<BenchReport, TopoError> {
    let rt = platform.runtime();
    if !rt.tracks_traces() {
        return Err(TopoError::RuntimeUnhealthy("trace tracking is disabled".into()));
    }
    let source_ids: Vec<&str> = spec.sources().map(|n| n.id.as_str()).collect();
    let sources: Vec<&StreamRef> = source_ids
        .iter()
        .map(|id| deployment.stream(id).ok_or_else(|| TopoError::UnknownNode((*id).to_owned())))
        .collect::<Result<_, _>>()?;
    let fed: Vec<Vec<usize>> = match cfg.injection {
        Injection::AllSources => (0..cfg.injections).map(|_| (0..sources.len()).collect()).collect(),
        Injection::RoundRobin if sources.is_empty() => vec![Vec::new(); cfg.injections],
        Injection::RoundRobin => (0..cfg.injections).map(|k| vec![k % sources.len()]).collect(),
    };
    let mut trees: HashMap<&[usize], super::ExecutionTree> = HashMap::new();
    for set in &fed {
        if !trees.contains_key(set.as_slice()) {
            let ids: Vec<&str> = set.iter().map(|&i| source_ids[i]).collect();
            trees.insert(set, derive_execution_tree(spec, &ids)?);
        }
    }
    let node_of: HashMap<&StreamRef, &str> = deployment.streams.iter().map(|(n, r)| (r, n.as_str())).collect();
    let g = spec.graph();
    let degree: HashMap<&str, (usize, usize)> = spec
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.id.as_str(), (g.pred[i].len(), g.succ[i].len())))
        .collect();

    if !rt.wait_quiescent(cfg.deadline) {
        return Err(TopoError::RuntimeUnhealthy("runtime busy before the run".into()));
    }
    rt.metrics().drain();
    let fetches_before = platform.store().fetch_count();
    let mut violations = Vec::new();
    let mut runs: Vec<(TraceId, Instant, Option<TraceReport>)> = Vec::with_capacity(cfg.injections);
    let t_start = Instant::now();
    for (k, set) in fed.iter().enumerate() {
        if let BenchMode::Paced { per_second } = cfg.mode {
            let due = t_start + Duration::from_secs_f64(k as f64 / per_second);
            if let Some(wait) = due.checked_duration_since(Instant::now()) {
                std::thread::sleep(wait);
            }
        }
        let trace = rt.open_trace();
        let t0 = Instant::now();
        for r in set.iter().map(|&i| sources[i]) {
            match rt.ingest_in(trace, r, su(k as u64 + 2, k as f64)) {
                Ok(IngestOutcome::Accepted { .. }) => {}
                Ok(IngestOutcome::StaleDiscard) => violations.push(format!("injection {k}: {r} rejected as stale")),
                Err(e) => {
                    rt.close_trace(trace);
                    return Err(TopoError::RuntimeUnhealthy(format!("injection {k}: {e}")));
                }
            }
        }
        rt.close_trace(trace);
        let report = match cfg.mode {
            BenchMode::Serial => Some(
                rt.wait_trace(trace, cfg.deadline)
                    .ok_or_else(|| TopoError::RuntimeUnhealthy(format!("injection {k} did not complete")))?,
            ),
            BenchMode::Paced { .. } => None,
        };
        runs.push((trace, t0, report));
    }
    for (k, (trace, _, report)) in runs.iter_mut().enumerate() {
        if report.is_none() {
            *report = Some(
                rt.wait_trace(*trace, cfg.deadline)
                    .ok_or_else(|| TopoError::RuntimeUnhealthy(format!("injection {k} did not complete")))?,
            );
        }
    }
    // every sample of the run is recorded before its trace completes
    let fetches = platform.store().fetch_count() - fetches_before;
    let timings = rt.metrics().drain();

    let windows: Vec<(Instant, Instant)> = runs
        .iter()
        .map(|(_, t0, r)| (*t0, *t0 + r.as_ref().expect("waited").elapsed))
        .collect();
    let isolated = |i: usize| {
        windows
            .iter()
            .enumerate()
            .all(|(j, w)| j == i || w.1 < windows[i].0 || windows[i].1 < w.0)
    };
    let mut per_trace_samples: HashMap<TraceId, usize> = HashMap::new();
    let ours: HashSet<TraceId> = runs.iter().map(|r| r.0).collect();
    let mut samples = Vec::new();
    for t in timings.into_iter().filter(|t| ours.contains(&t.trace_id)) {
        let Some(node) = node_of.get(&t.stream) else { continue };
        *per_trace_samples.entry(t.trace_id).or_default() += 1;
        let (i, o) = degree[node];
        samples.push(StageSample {
            node: (*node).to_owned(),
            in_degree: i,
            out_degree: o,
            trace_id: t.trace_id,
            queue_ns: t.queue_ns,
            input_stage_ns: t.input_stage_ns,
            compute_ns: t.compute_ns,
            output_stage_ns: t.output_stage_ns,
        });
    }

    let mut verified = 0;
    let mut end_to_end_ns = Vec::with_capacity(runs.len());
    for (k, (trace, _, report)) in runs.iter().enumerate() {
        let report = report.as_ref().expect("waited");
        end_to_end_ns.push(report.elapsed.as_nanos() as u64);
        if !isolated(k) {
            continue;
        }
        verified += 1;
        let tree = &trees[fed[k].as_slice()];
        let mut emitted: Vec<&str> = report
            .emissions
            .iter()
            .map(|r| node_of.get(r).copied().unwrap_or("?"))
            .collect();
        emitted.sort_unstable();
        let expected: Vec<&str> = tree.reachable.iter().map(String::as_str).collect();
        if emitted != expected {
            violations.push(format!("injection {k}: emitted {emitted:?}, expected {expected:?}"));
        }
        if report.gate_discards() != tree.expected_discards {
            violations.push(format!(
                "injection {k}: {} gate discards, expected {}",
                report.gate_discards(),
                tree.expected_discards
            ));
        }
        let other = report.discards.len() - report.gate_discards();
        if other > 0 {
            violations.push(format!("injection {k}: unexpected discards {:?}", report.discards_by_reason()));
        }
        let n = per_trace_samples.get(trace).copied().unwrap_or(0);
        if n != fed[k].len() + tree.reachable.len() {
            violations.push(format!(
                "injection {k}: {n} stage samples, expected {}",
                fed[k].len() + tree.reachable.len()
            ));
        }
    }

    Ok(BenchReport {
        family: cfg.family.clone(),
        size: cfg.size,
        mode: cfg.mode.as_str().to_owned(),
        injections: cfg.injections,
        end_to_end_ns,
        samples,
        verified,
        violations,
        fetches,
    })
}

type StageKey = (&'static str, usize, &'static str);

fn group<'a>(samples: impl Iterator<Item = &'a StageSample>) -> BTreeMap<StageKey, Vec<u64>> {
    let mut out: BTreeMap<StageKey, Vec<u64>> = BTreeMap::new();
    for s in samples {
        for stage in STAGES {
            out.entry(("in", s.in_degree, stage)).or_default().push(s.stage(stage));
            out.entry(("out", s.out_degree, stage)).or_default().push(s.stage(stage));
        }
    }
    out
}

fn io(e: impl std::fmt::Display) -> TopoError {
    TopoError::Io(e.to_string())
}

/// Deploys `spec` on a fresh in-memory platform, benchmarks it and shuts
/// the runtime down. Trace tracking is forced on.
pub fn run_on_fresh_platform(
    spec: &TopologySpec,
    runtime: RuntimeConfig,
    cfg: &BenchConfig,
) -> Result<BenchReport, TopoError> {
    let store = Arc::new(Store::open_memory(StoreConfig::default()));
    let rt = Runtime::start_new(
        store,
        RuntimeConfig {
            track_traces: true,
            ..runtime
        },
    )
    .map_err(io)?;
    let platform = Platform::new(rt);
    let result = deploy(spec, &platform).and_then(|d| run_benchmark(spec, &platform, &d, cfg));
    platform.runtime().shutdown();
    result
}

/// [`run_on_fresh_platform`] for a generated family member.
pub fn run_family(family: Family, size: usize, runtime: RuntimeConfig, cfg: &BenchConfig) -> Result<BenchReport, TopoError> {
    let spec = generate_family(family, size)?;
    run_on_fresh_platform(&spec, runtime, cfg)
}

/// Writes `stage_by_degree.csv` (all samples pooled),
/// `stage_by_degree_per_topology.csv` and `end_to_end.csv` into `dir`.
pub fn emit_report(reports: &[BenchReport], dir: &Path) -> Result<(), TopoError> {
    std::fs::create_dir_all(dir).map_err(io)?;

    let mut w = csv::Writer::from_path(dir.join("stage_by_degree.csv")).map_err(io)?;
    w.write_record(["degreeKind", "degree", "stage", "mean_ns", "median_ns", "p95_ns", "n"])
        .map_err(io)?;
    for ((kind, degree, stage), xs) in group(reports.iter().flat_map(|r| &r.samples)) {
        w.write_record([
            kind.to_owned(),
            degree.to_string(),
            stage.to_owned(),
            format!("{:.1}", mean(&xs)),
            format!("{:.1}", median(&xs)),
            format!("{:.1}", percentile(&xs, 95.0)),
            xs.len().to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(io)?;

    let mut w = csv::Writer::from_path(dir.join("stage_by_degree_per_topology.csv")).map_err(io)?;
    w.write_record([
        "family", "size", "degreeKind", "degree", "stage", "mean_ns", "median_ns", "p95_ns", "n",
    ])
    .map_err(io)?;
    for r in reports {
        for ((kind, degree, stage), xs) in group(r.samples.iter()) {
            w.write_record([
                r.family.clone(),
                r.size.to_string(),
                kind.to_owned(),
                degree.to_string(),
                stage.to_owned(),
                format!("{:.1}", mean(&xs)),
                format!("{:.1}", median(&xs)),
                format!("{:.1}", percentile(&xs, 95.0)),
                xs.len().to_string(),
            ])
            .map_err(io)?;
        }
    }
    w.flush().map_err(io)?;

    let mut w = csv::Writer::from_path(dir.join("end_to_end.csv")).map_err(io)?;
    w.write_record(["family", "size", "injection", "ns"]).map_err(io)?;
    for r in reports {
        for (k, ns) in r.end_to_end_ns.iter().enumerate() {
            w.write_record([r.family.clone(), r.size.to_string(), k.to_string(), ns.to_string()])
                .map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// Per-family medians as a plain-text table.
pub fn format_table(reports: &[BenchReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<8} {:>6} {:>6} {:>14} {:>14} {:>9} {:>10}",
        "family", "size", "inj", "median_us", "p95_us", "verified", "violations"
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{:<8} {:>6} {:>6} {:>14.1} {:>14.1} {:>9} {:>10}",
            r.family,
            r.size,
            r.injections,
            r.median_end_to_end() / 1e3,
            percentile(&r.end_to_end_ns, 95.0) / 1e3,
            r.verified,
            r.violations.len()
        );
    }
    out
}
