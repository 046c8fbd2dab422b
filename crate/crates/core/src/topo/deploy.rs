use indexmap::IndexMap;
use serde_json::json;

use crate::model::{ChannelValue, DescriptorDoc, SensorUpdate, StreamRef, Value};
use crate::platform::Platform;

use super::{NodeKind, TopoError, TopologySpec};

/// Stream name used for every deployed node.
pub const STREAM: &str = "data";
/// Channel name used for every deployed node.
pub const CHANNEL: &str = "v";

/// Where each node of a topology lives.
#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    pub streams: IndexMap<String, StreamRef>,
}

impl Deployment {
    pub fn stream(&self, node: &str) -> Option<&StreamRef> {
        self.streams.get(node)
    }

    /// Reverse lookup: which node a stream belongs to.
    pub fn node_of(&self, r: &StreamRef) -> Option<&str> {
        self.streams.iter().find(|(_, s)| *s == r).map(|(n, _)| n.as_str())
    }
}

fn node_doc(spec: &TopologySpec, id: &str, kind: NodeKind) -> DescriptorDoc {
    let stream = match kind {
        NodeKind::Source => json!({"channels": {CHANNEL: {"type": "number"}}}),
        NodeKind::Composite => {
            let ops: Vec<&str> = spec.operands_of(id).collect();
            let expr = ops
                .iter()
                .map(|o| format!("{{${o}.channels.{CHANNEL}.current-value}}"))
                .collect::<Vec<_>>()
                .join(" + ");
            let sources: serde_json::Map<String, serde_json::Value> = ops
                .iter()
                .map(|o| (o.to_string(), json!({"soId": o, "streamId": STREAM})))
                .collect();
            json!({"channels": {CHANNEL: {"type": "number", "current-value": expr}}, "sources": sources})
        }
    };
    serde_json::from_value(json!({
        "name": id,
        "description": format!("topology node {id}"),
        "streams": {STREAM: stream},
    }))
    .expect("generated descriptor is well-formed")
}

/// One Service Object per node; composites sum their operands. Every
/// stream is primed with `{v: 0}` at timestamp 1 so later injections
/// (timestamps >= 2) always find operand data, cycles included.
pub fn deploy(spec: &TopologySpec, platform: &Platform) -> Result<Deployment, TopoError> {
    spec.validate()?;
    let docs = spec
        .nodes
        .iter()
        .map(|n| (n.id.clone(), node_doc(spec, &n.id, n.kind)))
        .collect();
    let created = platform
        .create_batch(docs)
        .map_err(|e| TopoError::Deploy(e.to_string()))?;
    let streams: IndexMap<String, StreamRef> = spec
        .nodes
        .iter()
        .zip(&created)
        .map(|(n, so)| (n.id.clone(), so.stream_ref(STREAM)))
        .collect();
    for r in streams.values() {
        let seed = SensorUpdate::new(STREAM, 1, vec![ChannelValue::new(CHANNEL, Value::Number(0.0))]);
        platform
            .store()
            .append_update(r, seed)
            .map_err(|e| TopoError::Deploy(e.to_string()))?;
    }
    Ok(Deployment { streams })
}
