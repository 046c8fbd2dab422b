use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::par::Execution;

use super::TopologySpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GraphMetrics {
    pub max_in_degree: usize,
    pub mean_in_degree: f64,
    pub in_degree_std_dev: f64,
    pub max_out_degree: usize,
    pub mean_out_degree: f64,
    pub out_degree_std_dev: f64,
    pub edges: usize,
    pub nodes: usize,
    pub sources: usize,
    pub sinks: usize,
    /// `2E / (N (N - 1))`.
    pub density: f64,
    /// Vertex connectivity of the underlying simple undirected graph.
    pub connectivity: usize,
    /// Edge connectivity of the underlying simple undirected graph.
    pub edge_connectivity: usize,
}

fn mean_std(xs: &[usize]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<usize>() as f64 / n;
    let var = xs.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn compute_metrics(spec: &TopologySpec) -> GraphMetrics {
    let g = spec.graph();
    let indeg: Vec<usize> = g.pred.iter().map(Vec::len).collect();
    let outdeg: Vec<usize> = g.succ.iter().map(Vec::len).collect();
    let (mean_in, std_in) = mean_std(&indeg);
    let (mean_out, std_out) = mean_std(&outdeg);
    let n = g.n;
    let e = spec.edges.len();
    let und = undirected(&g.succ);
    GraphMetrics {
        max_in_degree: indeg.iter().copied().max().unwrap_or(0),
        mean_in_degree: mean_in,
        in_degree_std_dev: std_in,
        max_out_degree: outdeg.iter().copied().max().unwrap_or(0),
        mean_out_degree: mean_out,
        out_degree_std_dev: std_out,
        edges: e,
        nodes: n,
        sources: indeg.iter().filter(|&&d| d == 0).count(),
        sinks: outdeg.iter().filter(|&&d| d == 0).count(),
        density: if n > 1 {
            2.0 * e as f64 / (n * (n - 1)) as f64
        } else {
            0.0
        },
        connectivity: vertex_connectivity(&und),
        edge_connectivity: edge_connectivity(&und),
    }
}

/// Metrics for many topologies at once.
pub fn analyze_many(specs: &[TopologySpec], exec: Execution) -> Vec<GraphMetrics> {
    exec.map(specs, compute_metrics)
}

/// Symmetric, loop-free, deduplicated adjacency matrix.
fn undirected(succ: &[Vec<usize>]) -> Vec<Vec<bool>> {
    let n = succ.len();
    let mut adj = vec![vec![false; n]; n];
    for (a, outs) in succ.iter().enumerate() {
        for &b in outs {
            if a != b {
                adj[a][b] = true;
                adj[b][a] = true;
            }
        }
    }
    adj
}

/// Unit-capacity max flow by repeated BFS augmentation, stopping at `limit`.
struct Flow {
    cap: Vec<Vec<i32>>,
    nbr: Vec<Vec<usize>>,
}

impl Flow {
    fn new(cap: Vec<Vec<i32>>) -> Self {
        let n = cap.len();
        let mut nbr = vec![Vec::new(); n];
        for (u, adj) in nbr.iter_mut().enumerate() {
            adj.extend((0..n).filter(|&v| cap[u][v] > 0 || cap[v][u] > 0));
        }
        Self { cap, nbr }
    }

    fn max_flow(&mut self, s: usize, t: usize, limit: usize) -> usize {
        let n = self.cap.len();
        let mut flow = 0;
        while flow < limit {
            let mut parent = vec![usize::MAX; n];
            parent[s] = s;
            let mut q = VecDeque::from([s]);
            while let Some(u) = q.pop_front() {
                if u == t {
                    break;
                }
                for &v in &self.nbr[u] {
                    if parent[v] == usize::MAX && self.cap[u][v] > 0 {
                        parent[v] = u;
                        q.push_back(v);
                    }
                }
            }
            if parent[t] == usize::MAX {
                break;
            }
            let mut v = t;
            while v != s {
                let u = parent[v];
                self.cap[u][v] -= 1;
                self.cap[v][u] += 1;
                v = u;
            }
            flow += 1;
        }
        flow
    }
}

fn connected(adj: &[Vec<bool>]) -> bool {
    let n = adj.len();
    if n == 0 {
        return true;
    }
    let mut seen = vec![false; n];
    seen[0] = true;
    let mut stack = vec![0];
    while let Some(u) = stack.pop() {
        for v in 0..n {
            if adj[u][v] && !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Minimum number of edges whose removal disconnects the graph.
fn edge_connectivity(adj: &[Vec<bool>]) -> usize {
    let n = adj.len();
    if n < 2 || !connected(adj) {
        return 0;
    }
    let base: Vec<Vec<i32>> = adj.iter().map(|r| r.iter().map(|&b| b as i32).collect()).collect();
    let mut best = adj[0].iter().filter(|&&b| b).count();
    for t in 1..n {
        let mut f = Flow::new(base.clone());
        best = best.min(f.max_flow(0, t, best));
    }
    best
}

/// Minimum number of vertices whose removal disconnects the graph (or
/// leaves a single vertex): `N - 1` for complete graphs.
fn vertex_connectivity(adj: &[Vec<bool>]) -> usize {
    let n = adj.len();
    if n < 2 || !connected(adj) {
        return 0;
    }
    let mut best = n - 1;
    // Even: some vertex among the first best + 1 lies outside a minimum
    // separator, and the lowest such one pairs with a later vertex
    let mut s = 0;
    while s <= best && s < n {
        for t in s + 1..n {
            if adj[s][t] {
                continue;
            }
            // split v into v_in = 2v, v_out = 2v + 1
            let mut cap = vec![vec![0i32; 2 * n]; 2 * n];
            for v in 0..n {
                cap[2 * v][2 * v + 1] = if v == s || v == t { n as i32 } else { 1 };
                for u in 0..n {
                    if adj[v][u] {
                        cap[2 * v + 1][2 * u] = n as i32;
                    }
                }
            }
            let mut f = Flow::new(cap);
            best = best.min(f.max_flow(2 * s + 1, 2 * t, best));
        }
        s += 1;
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn adj(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
        let mut succ = vec![Vec::new(); n];
        for &(a, b) in edges {
            succ[a].push(b);
        }
        undirected(&succ)
    }

    #[test]
    fn connectivity_of_small_graphs() {
        // path
        let p = adj(4, &[(0, 1), (1, 2), (2, 3)]);
        assert_eq!((vertex_connectivity(&p), edge_connectivity(&p)), (1, 1));
        // cycle
        let c = adj(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]);
        assert_eq!((vertex_connectivity(&c), edge_connectivity(&c)), (2, 2));
        // K4
        let k: Vec<_> = (0..4).flat_map(|a| (a + 1..4).map(move |b| (a, b))).collect();
        let k4 = adj(4, &k);
        assert_eq!((vertex_connectivity(&k4), edge_connectivity(&k4)), (3, 3));
        // bowtie: two triangles sharing vertex 2
        let b = adj(5, &[(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 2)]);
        assert_eq!((vertex_connectivity(&b), edge_connectivity(&b)), (1, 2));
        // disconnected
        let d = adj(4, &[(0, 1), (2, 3)]);
        assert_eq!((vertex_connectivity(&d), edge_connectivity(&d)), (0, 0));
        // antiparallel edges collapse
        let two = adj(2, &[(0, 1), (1, 0)]);
        assert_eq!((vertex_connectivity(&two), edge_connectivity(&two)), (1, 1));
    }
}
