use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::Serialize;

use super::{NodeKind, TopoError, TopologySpec};

/// The computations one injection triggers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ExecutionTree {
    /// Composite nodes reachable from the injected sources.
    pub reachable: BTreeSet<String>,
    /// BFS arborescence as `(parent, child)` pairs, one per reachable node.
    pub tree: Vec<(String, String)>,
    /// Edges whose tail is injected or reachable and whose head is reachable.
    pub triggering_edges: usize,
    /// Arrivals expected to fail the timestamp gate.
    pub expected_discards: usize,
}

/// Execution tree for an injection into every node of `sources` at once.
pub fn derive_execution_tree(spec: &TopologySpec, sources: &[&str]) -> Result<ExecutionTree, TopoError> {
    let g = spec.graph();
    let mut start = Vec::new();
    for s in sources {
        let i = spec.index_of(s).ok_or_else(|| TopoError::UnknownNode((*s).to_owned()))?;
        if spec.nodes[i].kind != NodeKind::Source {
            return Err(TopoError::InvalidSpec(format!("{s:?} is not a source")));
        }
        start.push(i);
    }
    let mut reached = vec![false; g.n];
    let mut injected = vec![false; g.n];
    let mut tree = Vec::new();
    let mut q: VecDeque<usize> = start.iter().copied().collect();
    for &s in &start {
        injected[s] = true;
    }
    while let Some(u) = q.pop_front() {
        for &v in &g.succ[u] {
            if !reached[v] && !injected[v] {
                reached[v] = true;
                tree.push((spec.nodes[u].id.clone(), spec.nodes[v].id.clone()));
                q.push_back(v);
            }
        }
    }
    let triggering_edges = (0..g.n)
        .filter(|&u| reached[u] || injected[u])
        .map(|u| g.succ[u].iter().filter(|&&v| reached[v]).count())
        .sum::<usize>();
    let reachable: BTreeSet<String> = (0..g.n).filter(|&v| reached[v]).map(|v| spec.nodes[v].id.clone()).collect();
    Ok(ExecutionTree {
        expected_discards: triggering_edges - reachable.len(),
        reachable,
        tree,
        triggering_edges,
    })
}

/// Distance of every node to the nearest novelty-generating stream.
///
/// Sources have novelty 0. A composite with several inputs generates
/// novelty when one input carries a source ancestor that none of its other
/// inputs carries; a single-input composite generates novelty only when
/// that input is itself a source. Everything else is one step further
/// than its freshest input. Nodes that no novelty reaches get `None`.
pub fn compute_novelty(spec: &TopologySpec) -> BTreeMap<String, Option<usize>> {
    let g = spec.graph();
    // source ancestors of every node (a source is its own ancestor)
    let ancestry: Vec<BTreeSet<usize>> = (0..g.n)
        .map(|v| {
            let mut seen = vec![false; g.n];
            let mut stack = vec![v];
            seen[v] = true;
            let mut out = BTreeSet::new();
            while let Some(u) = stack.pop() {
                if g.source[u] {
                    out.insert(u);
                }
                for &p in &g.pred[u] {
                    if !seen[p] {
                        seen[p] = true;
                        stack.push(p);
                    }
                }
            }
            out
        })
        .collect();

    let generates = |v: usize| -> bool {
        if g.source[v] {
            return true;
        }
        let preds = &g.pred[v];
        if preds.len() == 1 {
            return g.source[preds[0]];
        }
        preds.iter().enumerate().any(|(i, &p)| {
            ancestry[p].iter().any(|s| {
                preds
                    .iter()
                    .enumerate()
                    .all(|(j, &o)| j == i || !ancestry[o].contains(s))
            })
        })
    };

    let mut dist: Vec<Option<usize>> = (0..g.n).map(|v| generates(v).then_some(0)).collect();
    let mut q: VecDeque<usize> = (0..g.n).filter(|&v| dist[v].is_some()).collect();
    while let Some(u) = q.pop_front() {
        let d = dist[u].expect("queued nodes have a distance");
        for &v in &g.succ[u] {
            if dist[v].is_none() {
                dist[v] = Some(d + 1);
                q.push_back(v);
            }
        }
    }
    spec.nodes.iter().zip(dist).map(|(n, d)| (n.id.clone(), d)).collect()
}
