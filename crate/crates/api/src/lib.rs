//! HTTP and WebSocket server: entity CRUD, queued batch simulation with
//! status polling, and streamed episodes.

mod error;
mod routes;
mod ws;

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{HeaderValue, Method, StatusCode};
use axum::response::IntoResponse;
use axum::routing::get;
use axum::{Json, Router};
use serde_json::{json, Value};
use socsim_core::domain::{Pk, Violation};
use socsim_core::engine::{enqueue, resolve, run_tracked, EngineContext, SimulationConfig};
use socsim_core::persistence::EntityKind;
use tokio::net::TcpListener;
use tokio::sync::Semaphore;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

pub use error::ApiError;
pub use routes::{openapi, ROUTES};
pub use ws::Frame;

pub const DEFAULT_PORT: u16 = 8800;
pub const DEFAULT_WORKERS: usize = 4;

#[derive(Clone)]
pub struct AppState {
    pub ctx: EngineContext,
    /// Bounds how many queued simulations run at once.
    workers: Arc<Semaphore>,
}

impl AppState {
    pub fn new(ctx: EngineContext, workers: usize) -> Self {
        Self { ctx, workers: Arc::new(Semaphore::new(workers.max(1))) }
    }
}

pub fn router(state: AppState, cors_origin: Option<&str>) -> Router {
    let mut app = Router::new().route("/openapi", get(|| async { Json(openapi()) }));
    for (path, kind) in [
        ("/scenarios", EntityKind::Scenario),
        ("/characters", EntityKind::Character),
        ("/relationships", EntityKind::Relationship),
        ("/episodes", EntityKind::Episode),
    ] {
        app = app
            .route(
                path,
                get(move |s: State<AppState>, q: Query<BTreeMap<String, String>>| list(s, kind, q))
                    .post(move |s: State<AppState>, body: Bytes| create(s, kind, body)),
            )
            .route(
                &format!("{path}/{{pk}}"),
                get(move |s: State<AppState>, pk: Path<String>| fetch(s, kind, pk))
                    .delete(move |s: State<AppState>, pk: Path<String>| remove(s, kind, pk)),
            );
    }
    let app = app
        .route("/simulate", axum::routing::post(simulate))
        .route("/simulate/status/{episode_pk}", get(status))
        .route("/ws/simulation", get(ws::upgrade))
        .with_state(state);
    match cors_origin {
        Some(origin) => app.layer(cors(origin)),
        None => app,
    }
}

fn cors(origin: &str) -> CorsLayer {
    let allow = if origin == "*" {
        AllowOrigin::any()
    } else {
        match HeaderValue::from_str(origin) {
            Ok(v) => AllowOrigin::exact(v),
            Err(_) => {
                tracing::warn!(origin, "ignoring unparsable CORS origin");
                AllowOrigin::list([])
            }
        }
    };
    CorsLayer::new().allow_origin(allow).allow_methods([Method::GET, Method::POST, Method::DELETE]).allow_headers(Any)
}

/// Serves until the listener fails.
pub async fn serve(listener: TcpListener, app: Router) -> std::io::Result<()> {
    axum::serve(listener, app).await
}

async fn list(
    State(state): State<AppState>,
    kind: EntityKind,
    Query(filter): Query<BTreeMap<String, String>>,
) -> Result<Json<Vec<Value>>, ApiError> {
    Ok(Json(state.ctx.store.list(kind, &filter).await?))
}

async fn fetch(State(state): State<AppState>, kind: EntityKind, Path(pk): Path<String>) -> Result<Json<Value>, ApiError> {
    Ok(Json(state.ctx.store.get(kind, &Pk::new(pk)).await?))
}

async fn remove(State(state): State<AppState>, kind: EntityKind, Path(pk): Path<String>) -> Result<StatusCode, ApiError> {
    state.ctx.store.delete(kind, &Pk::new(pk)).await?;
    Ok(StatusCode::NO_CONTENT)
}

fn parse_json(body: &Bytes) -> Result<Value, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("body is not valid JSON: {e}")))
}

async fn create(State(state): State<AppState>, kind: EntityKind, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let mut doc = parse_json(&body)?;
    let Some(map) = doc.as_object_mut() else {
        return Err(ApiError::validation(vec![Violation::new("document", "must be a JSON object")]));
    };
    let pk = match map.get("pk") {
        None | Some(Value::Null) => Pk::generate(),
        Some(Value::String(s)) if s.is_empty() => Pk::generate(),
        Some(Value::String(s)) => Pk::new(s.clone()),
        Some(_) => return Err(ApiError::validation(vec![Violation::new("pk", "must be a string")])),
    };
    map.insert("pk".into(), Value::String(pk.to_string()));
    if state.ctx.store.exists(kind, &pk).await? {
        return Err(ApiError::validation(vec![Violation::new("pk", "unique")]));
    }
    state.ctx.store.put(kind, &pk, &doc).await?;
    Ok((StatusCode::CREATED, Json(doc)))
}

async fn simulate(State(state): State<AppState>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let config: SimulationConfig = serde_json::from_value(parse_json(&body)?)
        .map_err(|e| ApiError::bad_request(format!("invalid simulation config: {e}")))?;
    resolve(&state.ctx, &config).await?;
    let episode_pk = enqueue(&state.ctx).await?;
    let (ctx, workers, pk) = (state.ctx.clone(), Arc::clone(&state.workers), episode_pk.clone());
    tokio::spawn(async move {
        let _permit = workers.acquire_owned().await.expect("worker pool never closed");
        if let Err(e) = run_tracked(&ctx, &config, pk.clone()).await {
            tracing::warn!(episode = %pk, error = %e, "queued simulation failed");
        }
    });
    Ok((StatusCode::ACCEPTED, Json(json!({"episode_pk": episode_pk}))))
}

async fn status(State(state): State<AppState>, Path(pk): Path<String>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(state.ctx.store.get_status(&Pk::new(pk)).await?))
}
