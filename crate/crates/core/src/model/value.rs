use std::fmt;

use serde::{Deserialize, Serialize};

/// Largest integer magnitude that an `f64` represents exactly.
const MAX_SAFE_INTEGER: f64 = 9_007_199_254_740_991.0;

/// A channel value or an intermediate expression result.
///
/// Numbers are 64-bit floats. On the wire, integral numbers are written
/// without a fractional part so `14` round-trips as `14` rather than `14.0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "serde_json::Value", into = "serde_json::Value")]
pub enum Value {
    Number(f64),
    Bool(bool),
    Str(String),
    Array(Vec<Value>),
    Null,
}

/// Wire tag of a channel value (`"type"` in update documents).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueType {
    #[serde(alias = "number")]
    Numeric,
    #[serde(alias = "bool")]
    Boolean,
    String,
    Array,
}

impl Value {
    pub fn value_type(&self) -> Option<ValueType> {
        match self {
            Value::Number(_) => Some(ValueType::Numeric),
            Value::Bool(_) => Some(ValueType::Boolean),
            Value::Str(_) => Some(ValueType::String),
            Value::Array(_) => Some(ValueType::Array),
            Value::Null => None,
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Number(_) => "number",
            Value::Bool(_) => "bool",
            Value::Str(_) => "string",
            Value::Array(_) => "array",
            Value::Null => "null",
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Number(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    /// Checks that the value may be stored as a channel value: not null,
    /// numbers finite, arrays homogeneous in tag (recursively).
    pub fn check_emittable(&self) -> Result<(), String> {
        match self {
            Value::Null => Err("value is null".into()),
            Value::Number(n) if !n.is_finite() => Err(format!("non-finite number {n}")),
            Value::Array(items) => {
                let mut tag = None;
                for item in items {
                    item.check_emittable()?;
                    let t = item.value_type();
                    match tag {
                        None => tag = t,
                        Some(prev) if Some(prev) != t => {
                            return Err(format!(
                                "array mixes {} and {} elements",
                                type_label(prev),
                                item.type_name()
                            ))
                        }
                        Some(_) => {}
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

fn type_label(t: ValueType) -> &'static str {
    match t {
        ValueType::Numeric => "number",
        ValueType::Boolean => "bool",
        ValueType::String => "string",
        ValueType::Array => "array",
    }
}

impl ValueType {
    /// Wire spelling.
    pub fn as_str(self) -> &'static str {
        match self {
            ValueType::Numeric => "numeric",
            ValueType::Boolean => "boolean",
            ValueType::String => "string",
            ValueType::Array => "array",
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let json: serde_json::Value = self.clone().into();
        write!(f, "{json}")
    }
}

impl From<f64> for Value {
    fn from(n: f64) -> Self {
        Value::Number(n)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Str(s.to_owned())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Str(s)
    }
}

impl From<Value> for serde_json::Value {
    fn from(v: Value) -> Self {
        match v {
            Value::Number(n) => number_to_json(n),
            Value::Bool(b) => serde_json::Value::Bool(b),
            Value::Str(s) => serde_json::Value::String(s),
            Value::Array(items) => {
                serde_json::Value::Array(items.into_iter().map(Into::into).collect())
            }
            Value::Null => serde_json::Value::Null,
        }
    }
}

fn number_to_json(n: f64) -> serde_json::Value {
    if n.fract() == 0.0 && n.abs() <= MAX_SAFE_INTEGER {
        serde_json::Value::from(n as i64)
    } else {
        serde_json::Number::from_f64(n)
            .map(serde_json::Value::Number)
            .unwrap_or(serde_json::Value::Null)
    }
}

impl TryFrom<serde_json::Value> for Value {
    type Error = String;

    fn try_from(v: serde_json::Value) -> Result<Self, Self::Error> {
        Ok(match v {
            serde_json::Value::Null => Value::Null,
            serde_json::Value::Bool(b) => Value::Bool(b),
            serde_json::Value::Number(n) => {
                Value::Number(n.as_f64().ok_or_else(|| format!("unrepresentable number {n}"))?)
            }
            serde_json::Value::String(s) => Value::Str(s),
            serde_json::Value::Array(items) => Value::Array(
                items
                    .into_iter()
                    .map(Value::try_from)
                    .collect::<Result<_, _>>()?,
            ),
            serde_json::Value::Object(_) => return Err("objects are not channel values".into()),
        })
    }
}
