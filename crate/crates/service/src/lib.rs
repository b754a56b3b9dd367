//! HTTP editing sessions: load a scene, apply object edits with undo, and
//! fetch rendered layers as PNG.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Component, Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, HeaderName, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine as _;
use derender::scene::{load_library, parse_scene_file, EditOp, Scene, BUILTIN_LIBRARY, SCENE_FORMAT};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::{AllowOrigin, CorsLayer};

pub mod render;
pub mod session;

pub use render::{parse_layers, render_pngs, Layer};
pub use session::{EditOutcome, Session, UndoOutcome};

pub const DEFAULT_PORT: u16 = 8723;
/// Response header carrying the scene revision a payload belongs to.
pub const REVISION_HEADER: &str = "x-scene-revision";

#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    /// Directory that relative `mesh_lib` paths resolve against. Without
    /// it only the built-in library is accepted.
    pub mesh_root: Option<PathBuf>,
}

#[derive(Debug, Default)]
struct Inner {
    config: ServiceConfig,
    sessions: Mutex<HashMap<String, Arc<tokio::sync::Mutex<Session>>>>,
    next_id: AtomicU64,
}

#[derive(Debug, Clone, Default)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        Self(Arc::new(Inner {
            config,
            ..Inner::default()
        }))
    }

    fn session(&self, id: &str) -> Result<Arc<tokio::sync::Mutex<Session>>, ApiError> {
        self.0
            .sessions
            .lock()
            .expect("session table poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("no session `{id}`")))
    }

    fn insert(&self, scene: Scene) -> String {
        let n = self.0.next_id.fetch_add(1, Ordering::Relaxed) + 1;
        let id = format!("s{n}");
        let session = Session::new(id.clone(), scene);
        self.0
            .sessions
            .lock()
            .expect("session table poisoned")
            .insert(id.clone(), Arc::new(tokio::sync::Mutex::new(session)));
        id
    }
}

/// JSON error body `{"error": message}` with a status code.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

fn revision_header(revision: u64) -> (HeaderName, HeaderValue) {
    (HeaderName::from_static(REVISION_HEADER), HeaderValue::from(revision))
}

/// Resolves a scene's `mesh_lib` entry, refusing paths that leave the
/// configured root.
fn resolve_library(spec: &str, config: &ServiceConfig) -> Result<derender::geom::MeshLibrary, ApiError> {
    if spec == BUILTIN_LIBRARY {
        return load_library(spec, None).map_err(|e| ApiError::bad_request(e.to_string()));
    }
    let root = config
        .mesh_root
        .as_deref()
        .ok_or_else(|| ApiError::bad_request(format!("mesh_lib: only `{BUILTIN_LIBRARY}` is served here")))?;
    let rel = Path::new(spec);
    if !rel.components().all(|c| matches!(c, Component::Normal(_))) {
        return Err(ApiError::bad_request("mesh_lib: must be a relative path inside the mesh root"));
    }
    load_library(spec, Some(root)).map_err(|e| ApiError::bad_request(format!("mesh_lib: {e}")))
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct LoadResponse {
    pub session_id: String,
    pub revision: u64,
}

async fn load_scene(State(state): State<AppState>, body: Bytes) -> Result<Json<LoadResponse>, ApiError> {
    let text = std::str::from_utf8(&body).map_err(|_| ApiError::bad_request("body is not UTF-8"))?;
    let file = parse_scene_file(text).map_err(|e| ApiError::bad_request(e.to_string()))?;
    if file.format != SCENE_FORMAT {
        return Err(ApiError::bad_request(format!("format: expected `{SCENE_FORMAT}`, got `{}`", file.format)));
    }
    let lib = resolve_library(&file.mesh_lib, &state.0.config)?;
    let scene = Scene::new(file.camera, file.mesh_lib, Arc::new(lib), file.objects)
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    let session_id = state.insert(scene);
    log::info!("session {session_id} created");
    Ok(Json(LoadResponse { session_id, revision: 0 }))
}

async fn get_scene(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let session = state.session(&id)?;
    let (scene, revision) = {
        let s = session.lock().await;
        (s.scene(), s.revision())
    };
    let body = scene.to_json().map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, HeaderValue::from_static("application/json")), revision_header(revision)], body).into_response())
}

async fn edit_scene(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<Json<EditOutcome>, ApiError> {
    let session = state.session(&id)?;
    let de = &mut serde_json::Deserializer::from_slice(&body);
    let op: EditOp = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ApiError::bad_request(format!("{path}: {}", e.into_inner()))
    })?;
    let mut s = session.lock().await;
    let outcome = s
        .apply(op)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
    Ok(Json(outcome))
}

async fn undo_edit(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Json<UndoOutcome>, ApiError> {
    let session = state.session(&id)?;
    let mut s = session.lock().await;
    s.undo()
        .map(Json)
        .ok_or_else(|| ApiError::new(StatusCode::CONFLICT, "nothing to undo"))
}

#[derive(Debug, Deserialize)]
struct RenderQuery {
    layers: Option<String>,
    format: Option<String>,
}

/// Multi-layer render payload: base64 PNGs keyed by layer name.
#[derive(Debug, Serialize, Deserialize)]
pub struct RenderResponse {
    pub revision: u64,
    pub layers: serde_json::Map<String, serde_json::Value>,
}

async fn render_layers(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<RenderQuery>,
) -> Result<Response, ApiError> {
    let session = state.session(&id)?;
    let layers = parse_layers(q.layers.as_deref().unwrap_or("instance")).map_err(ApiError::bad_request)?;
    let as_png = match q.format.as_deref() {
        None => layers.len() == 1,
        Some("png") if layers.len() == 1 => true,
        Some("png") => return Err(ApiError::bad_request("format=png takes exactly one layer")),
        Some("json") => false,
        Some(other) => return Err(ApiError::bad_request(format!("unknown format `{other}` (png, json)"))),
    };
    // snapshot, then render without holding the session
    let (scene, revision) = {
        let s = session.lock().await;
        (s.scene(), s.revision())
    };
    let pngs = tokio::task::spawn_blocking(move || render_pngs(&scene, &layers))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
    if as_png {
        let (_, png) = pngs.into_iter().next().expect("one layer");
        return Ok(([(header::CONTENT_TYPE, HeaderValue::from_static("image/png")), revision_header(revision)], png).into_response());
    }
    let engine = base64::engine::general_purpose::STANDARD;
    let layers = pngs
        .into_iter()
        .map(|(layer, png)| (layer.name().to_string(), engine.encode(png).into()))
        .collect();
    Ok(([revision_header(revision)], Json(RenderResponse { revision, layers })).into_response())
}

/// Browser access from locally served editor pages.
fn cors() -> CorsLayer {
    CorsLayer::new()
        .allow_origin(AllowOrigin::predicate(|origin: &HeaderValue, _| {
            origin.to_str().is_ok_and(|o| {
                let host = o.split("://").nth(1).unwrap_or("");
                let host = match host.rsplit_once(':') {
                    Some((h, port)) if !port.ends_with(']') => h,
                    _ => host,
                };
                matches!(host, "localhost" | "127.0.0.1" | "[::1]")
            })
        }))
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE])
        .expose_headers([HeaderName::from_static(REVISION_HEADER)])
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/scene", post(load_scene))
        .route("/api/scene/{id}", get(get_scene))
        .route("/api/scene/{id}/edit", post(edit_scene))
        .route("/api/scene/{id}/undo", post(undo_edit))
        .route("/api/scene/{id}/render", get(render_layers))
        .layer(cors())
        .with_state(state)
}

/// Serves until interrupted.
pub async fn serve(addr: SocketAddr, config: ServiceConfig) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(AppState::new(config)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
