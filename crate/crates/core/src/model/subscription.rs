use serde::{Deserialize, Serialize};

use super::{valid_name, ModelError, StreamRef};

/// A dispatch edge leaving `source`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subscription {
    pub id: String,
    pub source: StreamRef,
    #[serde(flatten)]
    pub kind: SubscriptionKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum SubscriptionKind {
    /// Feeds a composite stream, bound to one of its source aliases.
    #[serde(rename = "internal")]
    Internal { target: StreamRef, alias: String },
    /// Forwards every accepted update to an HTTP endpoint.
    #[serde(rename = "http.callback")]
    External {
        #[serde(rename = "callbackUrl")]
        callback_url: String,
        method: CallbackMethod,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CallbackMethod {
    #[serde(rename = "POST")]
    Post,
    #[serde(rename = "PUT")]
    Put,
}

impl SubscriptionKind {
    /// Parses the body of a subscription-creation request.
    pub fn from_request(body: &[u8]) -> Result<Self, ModelError> {
        let kind: SubscriptionKind =
            serde_json::from_slice(body).map_err(|e| ModelError::BadSubscription(e.to_string()))?;
        kind.check()?;
        Ok(kind)
    }

    pub fn check(&self) -> Result<(), ModelError> {
        match self {
            SubscriptionKind::Internal { target, alias } => {
                if target.so_id.is_empty() || target.stream_id.is_empty() || !valid_name(alias) {
                    return Err(ModelError::BadSubscription(
                        "internal subscription needs target soId, streamId and alias".into(),
                    ));
                }
            }
            SubscriptionKind::External { callback_url, .. } => {
                let url = url::Url::parse(callback_url)
                    .map_err(|e| ModelError::BadSubscription(format!("callbackUrl: {e}")))?;
                if !matches!(url.scheme(), "http" | "https") {
                    return Err(ModelError::BadSubscription(format!(
                        "callbackUrl scheme {:?} is not http(s)",
                        url.scheme()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn is_internal(&self) -> bool {
        matches!(self, SubscriptionKind::Internal { .. })
    }
}
