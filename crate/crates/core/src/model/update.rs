use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{valid_name, ModelError, Value, ValueType};

/// Milliseconds since the Unix epoch.
pub type Millis = u64;

/// Globally identifies one stream: the owning Service Object and the
/// stream's name within it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StreamRef {
    #[serde(rename = "soId")]
    pub so_id: String,
    #[serde(rename = "streamId")]
    pub stream_id: String,
}

impl StreamRef {
    pub fn new(so_id: impl Into<String>, stream_id: impl Into<String>) -> Self {
        Self {
            so_id: so_id.into(),
            stream_id: stream_id.into(),
        }
    }
}

impl fmt::Display for StreamRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.so_id, self.stream_id)
    }
}

/// One named dimension of a sensor update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelValue {
    pub name: String,
    #[serde(rename = "current-value")]
    pub current_value: Value,
    #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
    pub value_type: Option<ValueType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
}

impl ChannelValue {
    pub fn new(name: impl Into<String>, value: Value) -> Self {
        let value_type = value.value_type();
        Self {
            name: name.into(),
            current_value: value,
            value_type,
            unit: None,
        }
    }
}

/// The unit of data flowing through the platform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorUpdate {
    /// Name of the stream the update belongs to.
    #[serde(default)]
    pub name: String,
    pub channels: Vec<ChannelValue>,
    #[serde(rename = "lastUpdate")]
    pub last_update: Millis,
    #[serde(
        rename = "customFields",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub custom_fields: Option<BTreeMap<String, Value>>,
}

impl SensorUpdate {
    pub fn new(name: impl Into<String>, last_update: Millis, channels: Vec<ChannelValue>) -> Self {
        Self {
            name: name.into(),
            channels,
            last_update,
            custom_fields: None,
        }
    }

    pub fn channel(&self, name: &str) -> Option<&ChannelValue> {
        self.channels.iter().find(|c| c.name == name)
    }

    /// Enforces the update invariants and fills in missing `type` tags.
    pub fn validate(mut self) -> Result<Self, ModelError> {
        let bad = |m: String| Err(ModelError::MalformedUpdate(m));
        if self.channels.is_empty() {
            return bad("update has no channels".into());
        }
        let mut seen = HashSet::new();
        for ch in &mut self.channels {
            if !valid_name(&ch.name) {
                return bad(format!("invalid channel name {:?}", ch.name));
            }
            if !seen.insert(ch.name.clone()) {
                return bad(format!("duplicate channel {:?}", ch.name));
            }
            if let Err(e) = ch.current_value.check_emittable() {
                return bad(format!("channel {:?}: {e}", ch.name));
            }
            let actual = ch.current_value.value_type();
            match ch.value_type {
                None => ch.value_type = actual,
                Some(declared) if Some(declared) != actual => {
                    return bad(format!(
                        "channel {:?} declares type {:?} but holds a {}",
                        ch.name,
                        declared,
                        ch.current_value.type_name()
                    ));
                }
                Some(_) => {}
            }
        }
        if let Some(fields) = &self.custom_fields {
            for (k, v) in fields {
                if matches!(v, Value::Array(_)) {
                    return bad(format!("custom field {k:?} is not a scalar"));
                }
            }
        }
        Ok(self)
    }
}
