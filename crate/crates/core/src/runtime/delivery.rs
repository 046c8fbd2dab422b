use std::time::Duration;

use thiserror::Error;

use crate::model::CallbackMethod;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("delivery failed: {0}")]
pub struct DeliveryFailed(pub String);

/// Transport for external subscriptions. One call is one attempt; there
/// are no retries.
pub trait Deliverer: Send + Sync {
    fn deliver(&self, url: &str, method: CallbackMethod, body: &[u8]) -> Result<(), DeliveryFailed>;
}

/// Plain HTTP/1.1 via a blocking client. Clients are built lazily per
/// delivery thread, so constructing one inside an async context is safe.
pub struct HttpDeliverer {
    timeout: Duration,
}

impl HttpDeliverer {
    pub fn new(timeout: Duration) -> Self {
        Self { timeout }
    }
}

thread_local! {
    static CLIENT: std::cell::OnceCell<Result<reqwest::blocking::Client, String>> = const { std::cell::OnceCell::new() };
}

impl Deliverer for HttpDeliverer {
    fn deliver(&self, url: &str, method: CallbackMethod, body: &[u8]) -> Result<(), DeliveryFailed> {
        CLIENT.with(|cell| {
            let client = cell
                .get_or_init(|| {
                    reqwest::blocking::Client::builder()
                        .timeout(self.timeout)
                        .build()
                        .map_err(|e| e.to_string())
                })
                .as_ref()
                .map_err(|e| DeliveryFailed(e.clone()))?;
            let req = match method {
                CallbackMethod::Post => client.post(url),
                CallbackMethod::Put => client.put(url),
            };
            let resp = req
                .header("content-type", "application/json")
                .body(body.to_vec())
                .send()
                .map_err(|e| DeliveryFailed(e.to_string()))?;
            if resp.status().is_success() {
                Ok(())
            } else {
                Err(DeliveryFailed(format!("{url} answered {}", resp.status())))
            }
        })
    }
}
