//! HTTP front-end: the REST operations over a [`Platform`].
//!
//! Handlers only call thread-safe store and runtime operations and never
//! wait for pipeline completion; ingestion is fire-and-gate.

mod error;
mod routes;

use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use streamflow_core::platform::Platform;
use streamflow_core::runtime::{Runtime, RuntimeConfig};
use streamflow_core::store::{Store, StoreConfig, StoreError};
use thiserror::Error;

pub use error::ApiError;
pub use routes::router;

#[derive(Debug, Clone)]
pub struct ApiConfig {
    pub bind_address: SocketAddr,
    pub workers: usize,
    pub queue_capacity: usize,
    /// File-backed store root; `None` keeps everything in memory.
    pub store_root: Option<PathBuf>,
    pub callback_timeout: Duration,
}

impl Default for ApiConfig {
    fn default() -> Self {
        let rt = RuntimeConfig::default();
        Self {
            bind_address: SocketAddr::from(([127, 0, 0, 1], 8080)),
            workers: rt.workers,
            queue_capacity: rt.queue_capacity,
            store_root: None,
            callback_timeout: rt.callback_timeout,
        }
    }
}

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ApiConfig {
    pub fn validate(&self) -> Result<(), ServeError> {
        if self.workers == 0 {
            return Err(ServeError::Config("workerCount must be at least 1".into()));
        }
        if self.queue_capacity == 0 {
            return Err(ServeError::Config("queueCapacity must be at least 1".into()));
        }
        Ok(())
    }

    fn runtime_config(&self) -> RuntimeConfig {
        RuntimeConfig {
            workers: self.workers,
            queue_capacity: self.queue_capacity,
            callback_timeout: self.callback_timeout,
            ..RuntimeConfig::default()
        }
    }
}

/// Opens the configured store and starts a runtime over it.
pub fn build_platform(cfg: &ApiConfig) -> Result<Arc<Platform>, ServeError> {
    cfg.validate()?;
    let store = match &cfg.store_root {
        Some(root) => Store::open_dir(root, StoreConfig::default())?,
        None => Store::open_memory(StoreConfig::default()),
    };
    let runtime = Runtime::start_new(Arc::new(store), cfg.runtime_config())?;
    Ok(Arc::new(Platform::new(runtime)))
}

/// Serves until `shutdown` resolves, then drains the runtime.
pub async fn serve(cfg: ApiConfig, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<(), ServeError> {
    let platform = build_platform(&cfg)?;
    let listener = tokio::net::TcpListener::bind(cfg.bind_address).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(platform.clone()))
        .with_graceful_shutdown(shutdown)
        .await?;
    let rt = platform.clone();
    tokio::task::spawn_blocking(move || rt.runtime().shutdown())
        .await
        .map_err(std::io::Error::other)?;
    Ok(())
}
