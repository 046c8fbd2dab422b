use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::IntoResponse;
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use serde_json::json;
use streamflow_core::model::{DescriptorDoc, Millis, SensorUpdate, SoSummary, StreamRef, SubscriptionKind};
use streamflow_core::platform::Platform;
use streamflow_core::runtime::IngestOutcome;

use crate::ApiError;

type Shared = State<Arc<Platform>>;
type ApiResult<T> = Result<T, ApiError>;

pub fn router(platform: Arc<Platform>) -> Router {
    Router::new()
        .route("/", post(create_so).get(list_sos))
        .route("/subscriptions/{id}", delete(unsubscribe))
        .route("/{so_id}", get(get_so).put(update_so).delete(delete_so))
        .route("/{so_id}/streams", get(list_streams))
        .route("/{so_id}/streams/{stream_id}", get(query_data).put(put_data))
        .route("/{so_id}/streams/{stream_id}/subscriptions", post(subscribe))
        .with_state(platform)
}

fn descriptor(body: &[u8]) -> ApiResult<DescriptorDoc> {
    serde_json::from_slice(body).map_err(ApiError::malformed_descriptor)
}

async fn create_so(State(p): Shared, body: Bytes) -> ApiResult<impl IntoResponse> {
    let so = p.create_so(descriptor(&body)?)?;
    log::info!("created service object {}", so.id);
    Ok((StatusCode::CREATED, Json(so.summary())))
}

async fn list_sos(State(p): Shared) -> Json<Vec<SoSummary>> {
    Json(p.list_sos().iter().map(|so| so.summary()).collect())
}

async fn get_so(State(p): Shared, Path(id): Path<String>) -> ApiResult<Json<SoSummary>> {
    Ok(Json(p.get_so(&id)?.summary()))
}

async fn update_so(State(p): Shared, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<SoSummary>> {
    Ok(Json(p.update_so(&id, descriptor(&body)?)?.summary()))
}

async fn delete_so(State(p): Shared, Path(id): Path<String>) -> ApiResult<StatusCode> {
    p.delete_so(&id)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn list_streams(State(p): Shared, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(json!({"streams": p.streams(&id)?})))
}

async fn put_data(
    State(p): Shared,
    Path((so_id, stream_id)): Path<(String, String)>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    let su: SensorUpdate = serde_json::from_slice(&body).map_err(ApiError::malformed_update)?;
    let out = match p.put_data(&StreamRef::new(so_id, stream_id), su)? {
        IngestOutcome::Accepted { .. } => json!({"accepted": true}),
        IngestOutcome::StaleDiscard => json!({"accepted": false, "reason": "stale"}),
    };
    Ok(Json(out))
}

fn bound(params: &HashMap<String, String>, key: &str) -> ApiResult<Option<Millis>> {
    params
        .get(key)
        .map(|v| {
            v.parse::<Millis>()
                .map_err(|_| ApiError::BadQuery(format!("{key}={v:?} is not a millisecond timestamp")))
        })
        .transpose()
}

async fn query_data(
    State(p): Shared,
    Path((so_id, stream_id)): Path<(String, String)>,
    Query(params): Query<HashMap<String, String>>,
) -> ApiResult<impl IntoResponse> {
    let (from, to) = (bound(&params, "from")?, bound(&params, "to")?);
    let found = p.query(&StreamRef::new(so_id, stream_id), from, to)?;
    let data: Vec<&SensorUpdate> = found.iter().map(|su| su.as_ref()).collect();
    Ok(Json(json!({"data": data})))
}

async fn subscribe(
    State(p): Shared,
    Path((so_id, stream_id)): Path<(String, String)>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    let kind = SubscriptionKind::from_request(&body)?;
    let sub = p.subscribe(&StreamRef::new(so_id, stream_id), kind)?;
    Ok((StatusCode::CREATED, Json(json!({"id": sub.id}))))
}

async fn unsubscribe(State(p): Shared, Path(id): Path<String>) -> ApiResult<StatusCode> {
    p.unsubscribe(&id)?;
    Ok(StatusCode::NO_CONTENT)
}
