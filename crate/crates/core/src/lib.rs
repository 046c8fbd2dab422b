//! Multi-tenant pub/sub stream processing.
//!
//! Service Objects own named streams. Simple streams are fed from outside;
//! composite streams run user-supplied expressions over the latest updates
//! of the streams they subscribe to. Updates flow through the dispatch
//! runtime, gated by per-stream timestamps so that every injection is
//! computed at most once per stream, even on cyclic pipelines.

pub mod expr;
pub mod model;
pub mod store;
pub mod par;
pub mod runtime;
pub mod platform;
pub mod topo;
