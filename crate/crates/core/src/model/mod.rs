//! Domain types, identifiers, validation and the JSON document formats.

mod descriptor;
mod subscription;
mod update;
mod value;

use rand::RngCore;
use thiserror::Error;

pub use descriptor::{
    resolve_bindings, validate_descriptor, validate_replacement, ChannelDecl, ChannelDoc,
    CompositeChannel, CompositeStreamSpec, DescriptorDoc, Keyed, ServiceObject, SoSummary,
    SourceDoc, StreamDoc, StreamKind, StreamListing, StreamSpec,
};
pub use subscription::{CallbackMethod, Subscription, SubscriptionKind};
pub use update::{ChannelValue, Millis, SensorUpdate, StreamRef};
pub use value::{Value, ValueType};

use crate::expr::ParseError;

/// Alias bound to the target stream's own last emitted update.
pub const RESERVED_PREVIOUS: &str = "previous";
/// Alias bound to the candidate update while a post-filter runs.
pub const RESERVED_RESULT: &str = "result";

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ModelError {
    #[error("malformed descriptor: {0}")]
    MalformedDescriptor(String),
    #[error("stream {stream:?}{} {field}: {error}", channel.as_ref().map(|c| format!(" channel {c:?}")).unwrap_or_default())]
    ExpressionSyntax {
        stream: String,
        channel: Option<String>,
        field: &'static str,
        error: ParseError,
    },
    #[error("stream {stream:?}{} references unknown alias {alias:?}", channel.as_ref().map(|c| format!(" channel {c:?}")).unwrap_or_default())]
    DanglingAlias {
        stream: String,
        channel: Option<String>,
        alias: String,
    },
    #[error("source {alias:?} refers to unknown stream {stream}")]
    UnknownSource { alias: String, stream: StreamRef },
    #[error("malformed update: {0}")]
    MalformedUpdate(String),
    #[error("bad subscription: {0}")]
    BadSubscription(String),
}

impl ModelError {
    /// Stable machine-readable code used in API error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            ModelError::MalformedDescriptor(_) => "MalformedDescriptor",
            ModelError::ExpressionSyntax { .. } => "ExpressionSyntaxError",
            ModelError::DanglingAlias { .. } => "DanglingAlias",
            ModelError::UnknownSource { .. } => "UnknownSource",
            ModelError::MalformedUpdate(_) => "MalformedUpdate",
            ModelError::BadSubscription(_) => "BadSubscription",
        }
    }
}

/// Stream, channel and alias names: ASCII letters, digits, `_` and `-`.
///
/// Names end up in expression paths and on-disk file names, so `.` and `/`
/// are excluded.
pub fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
}

/// Source of Service Object and subscription identifiers.
pub trait IdSource: Send {
    fn next_id(&mut self) -> String;
}

/// 40 lowercase hex characters from the thread-local CSPRNG.
#[derive(Debug, Default, Clone, Copy)]
pub struct RandomIds;

impl IdSource for RandomIds {
    fn next_id(&mut self) -> String {
        let mut bytes = [0u8; 20];
        rand::rng().fill_bytes(&mut bytes);
        hex::encode(bytes)
    }
}

/// Deterministic ids for tests: `000..001`, `000..002`, ...
#[derive(Debug, Default, Clone)]
pub struct SequentialIds {
    next: u64,
}

impl IdSource for SequentialIds {
    fn next_id(&mut self) -> String {
        self.next += 1;
        format!("{:040x}", self.next)
    }
}
