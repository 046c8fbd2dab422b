//! Pipeline topologies: generation, graph analysis, deployment and the
//! latency benchmark.

mod analysis;
mod bench;
mod deploy;
mod generate;
mod metrics;
pub mod stats;

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use analysis::{compute_novelty, derive_execution_tree, ExecutionTree};
pub use bench::{
    emit_report, format_table, run_benchmark, run_family, run_on_fresh_platform, BenchConfig, BenchMode, BenchReport, Injection,
    StageSample,
};
pub use deploy::{deploy, Deployment, CHANNEL, STREAM};
pub use generate::{generate_family, generate_many, generate_random};
pub use metrics::{analyze_many, compute_metrics, GraphMetrics};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum TopoError {
    #[error("infeasible knobs: {0}")]
    InfeasibleKnobs(String),
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("invalid topology: {0}")]
    InvalidSpec(String),
    #[error("deployment failed: {0}")]
    Deploy(String),
    #[error("runtime unhealthy: {0}")]
    RuntimeUnhealthy(String),
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Source,
    Composite,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OperandDistribution {
    Uniform,
    /// Operand choice weighted by `(rank + 1)^-exponent`.
    Skewed { exponent: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GeneratorKnobs {
    pub num_streams: usize,
    pub num_composite: usize,
    /// Upper bound of the per-composite operand count (drawn from `1..=operands`).
    pub operands: usize,
    pub distribution: OperandDistribution,
    pub allow_cycles: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Length,
    #[serde(rename = "in")]
    InDegree,
    #[serde(rename = "out")]
    OutDegree,
    Random,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Length => "length",
            Family::InDegree => "in",
            Family::OutDegree => "out",
            Family::Random => "random",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "length" => Ok(Family::Length),
            "in" | "indegree" | "in-degree" => Ok(Family::InDegree),
            "out" | "outdegree" | "out-degree" => Ok(Family::OutDegree),
            "random" => Ok(Family::Random),
            _ => Err(format!("unknown family {s:?} (length|in|out|random)")),
        }
    }
}

/// A pipeline digraph. Edges point from operand to consumer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologySpec {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knobs: Option<GeneratorKnobs>,
}

/// Adjacency by node index.
pub(crate) struct Graph {
    pub(crate) n: usize,
    pub(crate) succ: Vec<Vec<usize>>,
    pub(crate) pred: Vec<Vec<usize>>,
    pub(crate) source: Vec<bool>,
}

impl TopologySpec {
    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn sources(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Source)
    }

    pub fn composites(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Composite)
    }

    /// Operands of `id` in edge order.
    pub fn operands_of<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.edges.iter().filter(move |e| e.to == id).map(|e| e.from.as_str())
    }

    /// Checks the structural invariants: unique ids, known endpoints, no
    /// self-loops or duplicate edges, sources without inputs, composites
    /// with at least one.
    pub fn validate(&self) -> Result<(), TopoError> {
        let mut ids = HashSet::new();
        for n in &self.nodes {
            if n.id.is_empty() || !crate::model::valid_name(&n.id) {
                return Err(TopoError::InvalidSpec(format!("invalid node id {:?}", n.id)));
            }
            if !ids.insert(n.id.as_str()) {
                return Err(TopoError::InvalidSpec(format!("duplicate node {:?}", n.id)));
            }
        }
        let mut seen = HashSet::new();
        let mut indeg: HashMap<&str, usize> = HashMap::new();
        for e in &self.edges {
            for end in [&e.from, &e.to] {
                if !ids.contains(end.as_str()) {
                    return Err(TopoError::UnknownNode(end.clone()));
                }
            }
            if e.from == e.to {
                return Err(TopoError::InvalidSpec(format!("self-loop on {:?}", e.from)));
            }
            if !seen.insert(e) {
                return Err(TopoError::InvalidSpec(format!("duplicate edge {} -> {}", e.from, e.to)));
            }
            *indeg.entry(e.to.as_str()).or_default() += 1;
        }
        for n in &self.nodes {
            let d = indeg.get(n.id.as_str()).copied().unwrap_or(0);
            match n.kind {
                NodeKind::Source if d > 0 => {
                    return Err(TopoError::InvalidSpec(format!("source {:?} has inputs", n.id)))
                }
                NodeKind::Composite if d == 0 => {
                    return Err(TopoError::InvalidSpec(format!("composite {:?} has no inputs", n.id)))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub(crate) fn graph(&self) -> Graph {
        let index: HashMap<&str, usize> = self.nodes.iter().enumerate().map(|(i, n)| (n.id.as_str(), i)).collect();
        let n = self.nodes.len();
        let mut succ = vec![Vec::new(); n];
        let mut pred = vec![Vec::new(); n];
        for e in &self.edges {
            let (a, b) = (index[e.from.as_str()], index[e.to.as_str()]);
            succ[a].push(b);
            pred[b].push(a);
        }
        Graph {
            n,
            succ,
            pred,
            source: self.nodes.iter().map(|x| x.kind == NodeKind::Source).collect(),
        }
    }
}
