use proptest::prelude::*;
use serde_json::json;
use streamflow_core::model::{
    validate_descriptor, DescriptorDoc, SensorUpdate, SequentialIds, ServiceObject, Value,
};

fn name() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_-]{0,7}"
}

fn text() -> impl Strategy<Value = String> {
    "[ -~]{0,16}"
}

/// A descriptor with simple streams and one composite summing them.
fn descriptor() -> impl Strategy<Value = serde_json::Value> {
    (
        text(),
        text(),
        prop::collection::btree_map(name(), prop::collection::btree_set(name(), 1..4), 1..4),
        prop::option::of(text()),
        any::<bool>(),
        prop::collection::btree_set(name(), 0..3),
    )
        .prop_map(|(so_name, desc, simple, unit, keyed, actions)| {
            let mut streams = serde_json::Map::new();
            let mut sources = serde_json::Map::new();
            let mut terms = Vec::new();
            for (i, (stream, channels)) in simple.iter().enumerate() {
                let ch: Vec<_> = channels
                    .iter()
                    .map(|c| json!({"name": c, "type": "number", "unit": unit}))
                    .collect();
                streams.insert(format!("s-{stream}"), json!({"channels": ch, "description": desc}));
                let alias = format!("a{i}");
                let first = channels.iter().next().unwrap();
                terms.push(format!("{{${alias}.channels.{first}.current-value}}"));
                sources.insert(alias, json!({"streamId": format!("s-{stream}")}));
            }
            let expr = terms.join(" + ");
            streams.insert(
                "total".into(),
                json!({
                    "channels": {"sum": {"type": "number", "current-value": expr, "post-filter": "{$result.channels.sum.current-value} > 0"}},
                    "sources": sources,
                    "pre-filter": "{$previous.lastUpdate} >= 0",
                }),
            );
            let streams = if keyed {
                serde_json::Value::Object(streams)
            } else {
                serde_json::Value::Array(
                    streams
                        .into_iter()
                        .map(|(k, mut v)| {
                            v["name"] = json!(k);
                            v
                        })
                        .collect(),
                )
            };
            json!({"name": so_name, "description": desc, "streams": streams, "actions": actions})
        })
}

proptest! {
    #[test]
    fn descriptor_round_trips_through_stored_document(doc in descriptor()) {
        let doc: DescriptorDoc = serde_json::from_value(doc).unwrap();
        let so = validate_descriptor(doc, &mut SequentialIds::default(), 1_700_000_000_000).unwrap();
        let wire = serde_json::to_string(&so.to_document()).unwrap();
        let back = ServiceObject::from_stored(serde_json::from_str(&wire).unwrap()).unwrap();
        prop_assert_eq!(&back, &so);
        prop_assert_eq!(back.to_document(), so.to_document());
        prop_assert_eq!(so.streams.len(), so.summary().streams.len());
    }

    #[test]
    fn update_documents_round_trip(
        ts in 0u64..1u64 << 52,
        n in -1e12f64..1e12,
        s in text(),
        b in any::<bool>(),
        xs in prop::collection::vec(-1e6f64..1e6, 0..5),
    ) {
        let doc = json!({
            "name": "data",
            "lastUpdate": ts,
            "channels": [
                {"name": "n", "current-value": n, "type": "numeric"},
                {"name": "s", "current-value": s, "type": "string"},
                {"name": "b", "current-value": b, "type": "boolean"},
                {"name": "xs", "current-value": xs, "type": "array"},
            ],
            "customFields": {"k": s},
        });
        let su: SensorUpdate = serde_json::from_value(doc).unwrap();
        let su = su.validate().unwrap();
        let back: SensorUpdate = serde_json::from_str(&serde_json::to_string(&su).unwrap()).unwrap();
        prop_assert_eq!(&back, &su);
        prop_assert_eq!(&back.channel("n").unwrap().current_value, &Value::Number(n));
    }
}

#[test]
fn integral_numbers_keep_their_wire_form() {
    assert_eq!(serde_json::to_string(&Value::Number(14.0)).unwrap(), "14");
    assert_eq!(serde_json::to_string(&Value::Number(-2.5)).unwrap(), "-2.5");
    let v: Value = serde_json::from_str("[1, \"a\", true]").unwrap();
    assert_eq!(
        v,
        Value::Array(vec![Value::Number(1.0), Value::Str("a".into()), Value::Bool(true)])
    );
}
