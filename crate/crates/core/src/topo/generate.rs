use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::par::Execution;

use super::{Edge, Family, GeneratorKnobs, Node, NodeKind, OperandDistribution, TopoError, TopologySpec};

/// Random pipeline from `knobs`; identical output for identical knobs.
///
/// Nodes are laid out in a random order whose first element is always a
/// source. Each composite draws an operand count from `1..=operands` and
/// picks that many distinct operands: among earlier nodes when cycles are
/// disallowed (so the order is a topological order), among all other nodes
/// otherwise.
pub fn generate_random(knobs: &GeneratorKnobs) -> Result<TopologySpec, TopoError> {
    let n = knobs.num_streams;
    let c = knobs.num_composite;
    let infeasible = |m: String| Err(TopoError::InfeasibleKnobs(m));
    if n == 0 {
        return infeasible("no streams".into());
    }
    if c >= n {
        return infeasible(format!("{c} composites leave no source among {n} streams"));
    }
    if knobs.operands == 0 {
        return infeasible("operands must be at least 1".into());
    }
    if knobs.operands > n - 1 {
        return infeasible(format!("{} operands exceed the {} other streams", knobs.operands, n - 1));
    }
    if let OperandDistribution::Skewed { exponent } = knobs.distribution {
        if !exponent.is_finite() || exponent < 0.0 {
            return infeasible(format!("skew exponent {exponent} must be finite and non-negative"));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(knobs.seed);
    // positions 1.. hold the remaining sources and all composites
    let mut kinds: Vec<NodeKind> = std::iter::repeat_n(NodeKind::Source, n - 1 - c)
        .chain(std::iter::repeat_n(NodeKind::Composite, c))
        .collect();
    kinds.shuffle(&mut rng);
    kinds.insert(0, NodeKind::Source);
    let nodes: Vec<Node> = kinds
        .iter()
        .enumerate()
        .map(|(i, k)| Node {
            id: format!("n{i}"),
            kind: *k,
        })
        .collect();

    let mut edges = Vec::new();
    for (pos, kind) in kinds.iter().enumerate() {
        if *kind == NodeKind::Source {
            continue;
        }
        let mut candidates: Vec<usize> = if knobs.allow_cycles {
            (0..n).filter(|&i| i != pos).collect()
        } else {
            (0..pos).collect()
        };
        let k = rng.random_range(1..=knobs.operands).min(candidates.len());
        for _ in 0..k {
            let pick = match knobs.distribution {
                OperandDistribution::Uniform => rng.random_range(0..candidates.len()),
                OperandDistribution::Skewed { exponent } => {
                    let weights: Vec<f64> = candidates.iter().map(|&i| ((i + 1) as f64).powf(-exponent)).collect();
                    let total: f64 = weights.iter().sum();
                    let mut x = rng.random::<f64>() * total;
                    let mut chosen = weights.len() - 1;
                    for (j, w) in weights.iter().enumerate() {
                        if x < *w {
                            chosen = j;
                            break;
                        }
                        x -= w;
                    }
                    chosen
                }
            };
            let from = candidates.swap_remove(pick);
            edges.push(Edge {
                from: nodes[from].id.clone(),
                to: nodes[pos].id.clone(),
            });
        }
    }
    Ok(TopologySpec {
        nodes,
        edges,
        seed: knobs.seed,
        knobs: Some(knobs.clone()),
    })
}

/// The Experiment-2 shapes. `size` counts composite streams for `Length`
/// and `OutDegree`, and sources for `InDegree`; size 1 is the same
/// single-edge pipeline for all three.
pub fn generate_family(kind: Family, size: usize) -> Result<TopologySpec, TopoError> {
    if size == 0 {
        return Err(TopoError::InfeasibleKnobs("family size must be at least 1".into()));
    }
    let node = |id: String, kind| Node { id, kind };
    let edge = |from: &str, to: &str| Edge {
        from: from.to_owned(),
        to: to.to_owned(),
    };
    let (nodes, edges) = match kind {
        Family::Length => {
            let mut nodes = vec![node("src".into(), NodeKind::Source)];
            nodes.extend((1..=size).map(|i| node(format!("c{i}"), NodeKind::Composite)));
            let edges = nodes.windows(2).map(|w| edge(&w[0].id, &w[1].id)).collect();
            (nodes, edges)
        }
        Family::InDegree => {
            let mut nodes: Vec<Node> = (1..=size).map(|i| node(format!("s{i}"), NodeKind::Source)).collect();
            let edges = nodes.iter().map(|s| edge(&s.id, "sink")).collect();
            nodes.push(node("sink".into(), NodeKind::Composite));
            (nodes, edges)
        }
        Family::OutDegree => {
            let mut nodes = vec![node("src".into(), NodeKind::Source)];
            nodes.extend((1..=size).map(|i| node(format!("k{i}"), NodeKind::Composite)));
            let edges = nodes[1..].iter().map(|k| edge("src", &k.id)).collect();
            (nodes, edges)
        }
        Family::Random => {
            return generate_random(&GeneratorKnobs {
                num_streams: size + 1,
                num_composite: size.div_ceil(2),
                operands: 3.min(size),
                distribution: OperandDistribution::Uniform,
                allow_cycles: false,
                seed: size as u64,
            })
        }
    };
    Ok(TopologySpec {
        nodes,
        edges,
        seed: 0,
        knobs: None,
    })
}

/// Generates one topology per knob set.
pub fn generate_many(knobs: &[GeneratorKnobs], exec: Execution) -> Vec<Result<TopologySpec, TopoError>> {
    exec.map(knobs, generate_random)
}
