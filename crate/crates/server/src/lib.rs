//! Local JSON API over one store file.
//!
//! Reads are served from an immutable snapshot. Mutations go through a
//! single writer: the new store is validated, written to disk under the
//! adjacent lockfile, and only then swapped in, so readers see either the
//! old or the new state.
//!
//! Error bodies are `{code, message, details?}` with codes from
//! [`ERROR_CODES`].

use std::collections::HashMap;
use std::net::{Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use astrolabe_core::metrics::{cluster, compute_metric, MetricsError};
use astrolabe_core::{
    compute_id, depth_filtration, extract_skeleton, parse_record, propagate, ClusterMethod,
    ClusterParams, Direction, HashId, HashMode, MetricName, MetricParamsF64, Source, Store,
    StoreError, StoreLock,
};
use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use thiserror::Error;

pub const API_VERSION: &str = "1";

/// Every `code` an error body can carry.
pub const ERROR_CODES: [&str; 14] = [
    "unknown_id",
    "axiom_violation",
    "duplicate_record_conflict",
    "hash_collision",
    "would_break_closure",
    "malformed_body",
    "malformed_query",
    "unknown_metric",
    "unknown_method",
    "invalid_parameter",
    "empty_graph",
    "non_convergence",
    "store_locked",
    "internal",
];

const LOCK_WAIT: Duration = Duration::from_secs(5);

#[derive(Debug, Error)]
pub enum ServerError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("store is not well-formed: {0}")]
    Invalid(String),
    #[error("server i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug)]
pub struct AppState {
    path: PathBuf,
    store: RwLock<Arc<Store>>,
    writer: Mutex<()>,
}

impl AppState {
    /// Loads the store at `path`; a missing file starts an empty store.
    pub fn load(path: impl AsRef<Path>, mode: HashMode) -> Result<Arc<Self>, ServerError> {
        let path = path.as_ref().to_path_buf();
        let store = if path.exists() {
            Store::load(&path, mode)?
        } else {
            Store::new(mode)
        };
        let report = store.validate();
        if !report.is_well_formed {
            let first = &report.violations[0];
            return Err(ServerError::Invalid(format!(
                "{} violation(s), first: axiom {} on {}: {}",
                report.violations.len(),
                first.axiom,
                first.nerve_id,
                first.message
            )));
        }
        Ok(Arc::new(AppState {
            path,
            store: RwLock::new(Arc::new(store)),
            writer: Mutex::new(()),
        }))
    }

    pub fn snapshot(&self) -> Arc<Store> {
        self.store.read().expect("store lock poisoned").clone()
    }

    /// Applies `f` to a copy of the store, persists it and publishes it.
    fn mutate<T>(&self, f: impl FnOnce(&mut Store) -> Result<T, ApiError>) -> Result<T, ApiError> {
        let _writer = self.writer.lock().expect("writer lock poisoned");
        let mut next = (*self.snapshot()).clone();
        let out = f(&mut next)?;
        let report = next.validate();
        if !report.is_well_formed {
            return Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "axiom_violation",
                "mutation would leave the store malformed",
            )
            .with_details(json!({ "violations": report.violations })));
        }
        let _file = StoreLock::acquire(&self.path, LOCK_WAIT).map_err(ApiError::from)?;
        next.save(&self.path).map_err(ApiError::from)?;
        *self.store.write().expect("store lock poisoned") = Arc::new(next);
        Ok(out)
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    details: Option<Value>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            details: None,
        }
    }

    fn with_details(mut self, details: Value) -> Self {
        self.details = Some(details);
        self
    }

    fn bad_query(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "malformed_query", message)
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let message = e.to_string();
        match &e {
            StoreError::NotFound { id } => ApiError::new(StatusCode::NOT_FOUND, "unknown_id", message)
                .with_details(json!({ "id": id })),
            StoreError::DuplicateRecordConflict { id } | StoreError::HashCollision { id } => {
                ApiError::new(StatusCode::CONFLICT, e.code(), message).with_details(json!({ "id": id }))
            }
            StoreError::WouldBreakClosure { id, dependents } => {
                ApiError::new(StatusCode::CONFLICT, "would_break_closure", message)
                    .with_details(json!({ "id": id, "dependents": dependents }))
            }
            StoreError::UnknownRef { .. }
            | StoreError::DuplicateRef { .. }
            | StoreError::SelfRef { .. }
            | StoreError::TooFewRefs { .. } => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "axiom_violation", message)
                    .with_details(json!({ "axiom": e.axiom(), "reason": e.code() }))
            }
            StoreError::InvalidId { .. } => ApiError::new(StatusCode::BAD_REQUEST, "malformed_body", message),
            StoreError::Locked { .. } => ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "store_locked", message),
            _ => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message),
        }
    }
}

impl From<MetricsError> for ApiError {
    fn from(e: MetricsError) -> Self {
        let status = match e {
            MetricsError::NonConvergence { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "code": self.code, "message": self.message });
        if let Some(details) = self.details {
            body["details"] = details;
        }
        (self.status, Json(body)).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/store", get(get_store))
        .route("/api/nerve", post(post_nerve))
        .route("/api/nerve/{id}", get(get_nerve).delete(delete_nerve))
        .route("/api/network", get(get_network))
        .route("/api/metrics", get(get_metrics))
        .route("/api/cluster", get(get_cluster))
        .route("/api/propagate", post(post_propagate))
        .route("/api/version", get(get_version))
        .route("/api/health", get(get_health))
        .with_state(state)
}

/// Binds `127.0.0.1:port` and serves until the process ends.
pub async fn serve(store_path: impl AsRef<Path>, mode: HashMode, port: u16) -> Result<(), ServerError> {
    let state = AppState::load(store_path, mode)?;
    let listener = tokio::net::TcpListener::bind(SocketAddr::from((Ipv4Addr::LOCALHOST, port))).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}

fn etag_of(text: &str) -> String {
    format!("\"{}\"", compute_id(text))
}

async fn get_store(
    State(state): State<Arc<AppState>>,
    Query(query): Query<HashMap<String, String>>,
    headers: HeaderMap,
) -> ApiResult {
    let text = state.snapshot().to_canonical_json()?;
    let etag = etag_of(&text);
    let bare = etag.trim_matches('"');
    let client = query.get("etag").map(String::as_str).or_else(|| {
        headers
            .get(header::IF_NONE_MATCH)
            .and_then(|v| v.to_str().ok())
    });
    let mut response = match client {
        Some(tag) if tag.trim().trim_matches('"') == bare => StatusCode::NOT_MODIFIED.into_response(),
        _ => ([(header::CONTENT_TYPE, "application/json")], text).into_response(),
    };
    response
        .headers_mut()
        .insert(header::ETAG, HeaderValue::from_str(&etag).expect("hex etag"));
    Ok(response)
}

async fn get_nerve(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult {
    let store = state.snapshot();
    let nerve = store
        .get(&id)
        .ok_or_else(|| ApiError::from(StoreError::NotFound { id: HashId::new(id.clone()) }))?;
    let depth = depth_filtration(&store).depth(&id);
    Ok(Json(json!({
        "id": nerve.id,
        "ref": nerve.refs,
        "record": nerve.record,
        "fields": parse_record(&nerve.record),
        "width": nerve.width(),
        "depth": depth,
    }))
    .into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NewNerve {
    record: String,
    #[serde(default)]
    refs: Vec<String>,
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "malformed_body", e.to_string()))
}

async fn post_nerve(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult {
    let req: NewNerve = parse_body(&body)?;
    let refs: Vec<HashId> = req.refs.into_iter().map(HashId::new).collect();
    let (id, created) = state.mutate(|store| {
        let before = store.len();
        let id = if refs.is_empty() {
            store.insert_atom(&req.record)?
        } else {
            store.insert_nerve(&req.record, &refs)?
        };
        Ok((id, store.len() > before))
    })?;
    let status = if created { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, Json(json!({ "id": id, "created": created }))).into_response())
}

async fn delete_nerve(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult {
    let removed = state.mutate(|store| Ok(store.remove_nerve(&id)?))?;
    Ok(Json(json!({ "removed": removed.id })).into_response())
}

async fn get_network(State(state): State<Arc<AppState>>) -> ApiResult {
    let store = state.snapshot();
    Ok(Json(extract_skeleton(&store).export()).into_response())
}

fn source_param(query: &HashMap<String, String>) -> Result<Option<Source>, ApiError> {
    match query.get("source").map(String::as_str) {
        None | Some("") | Some("all") => Ok(None),
        Some(s) => s
            .parse()
            .map(Some)
            .map_err(|e: String| ApiError::new(StatusCode::BAD_REQUEST, "invalid_parameter", e)),
    }
}

fn number_param<T: std::str::FromStr>(query: &HashMap<String, String>, key: &str) -> Result<Option<T>, ApiError> {
    query
        .get(key)
        .map(|v| {
            v.parse()
                .map_err(|_| ApiError::new(StatusCode::BAD_REQUEST, "invalid_parameter", format!("`{key}` must be a non-negative integer")))
        })
        .transpose()
}

/// Runs a computation on a snapshot off the async workers.
async fn compute<T, F>(state: &AppState, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&Store) -> Result<T, ApiError> + Send + 'static,
{
    let store = state.snapshot();
    tokio::task::spawn_blocking(move || f(&store))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

async fn get_metrics(
    State(state): State<Arc<AppState>>,
    Query(query): Query<HashMap<String, String>>,
) -> ApiResult {
    let name: MetricName = query
        .get("name")
        .ok_or_else(|| ApiError::bad_query("missing `name`"))?
        .parse()?;
    let source = source_param(&query)?;
    // Metrics are deterministic; the seed is accepted for a uniform query shape.
    let _seed: Option<u64> = number_param(&query, "seed")?;
    let vector = compute(&state, move |store| {
        let skeleton = extract_skeleton(store);
        Ok(compute_metric(&skeleton, name, &MetricParamsF64::default(), source)?)
    })
    .await?;
    Ok(Json(vector).into_response())
}

async fn get_cluster(
    State(state): State<Arc<AppState>>,
    Query(query): Query<HashMap<String, String>>,
) -> ApiResult {
    let method: ClusterMethod = query
        .get("method")
        .ok_or_else(|| ApiError::bad_query("missing `method`"))?
        .parse()?;
    let params = ClusterParams {
        k: number_param(&query, "k")?,
        seed: number_param(&query, "seed")?.unwrap_or(0),
    };
    let source = source_param(&query)?;
    let clustering = compute(&state, move |store| {
        let skeleton = extract_skeleton(store);
        Ok(cluster::<f64>(&skeleton, method, &params, source)?)
    })
    .await?;
    Ok(Json(clustering).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PropagateRequest {
    id: String,
    #[serde(default)]
    reverse: bool,
}

async fn post_propagate(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult {
    let req: PropagateRequest = parse_body(&body)?;
    let store = state.snapshot();
    let direction = if req.reverse {
        Direction::Reverse
    } else {
        Direction::Forward
    };
    let affected = propagate(&extract_skeleton(&store), &req.id, direction).map_err(|e| {
        ApiError::new(StatusCode::NOT_FOUND, "unknown_id", e.to_string()).with_details(json!({ "id": req.id }))
    })?;
    Ok(Json(affected).into_response())
}

async fn get_version() -> Json<Value> {
    Json(json!({
        "name": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "api": API_VERSION,
    }))
}

async fn get_health(State(state): State<Arc<AppState>>) -> Json<Value> {
    let store = state.snapshot();
    Json(json!({ "status": "ok", "nerves": store.len(), "mode": store.mode() }))
}
