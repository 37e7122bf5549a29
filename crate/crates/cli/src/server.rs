//! JSON-over-HTTP routes for review sessions.
//!
//! Session work (loading projects, predicting) is blocking, so every handler
//! runs it on the blocking pool. Requests for one session are serialized by
//! its mutex; different sessions proceed in parallel.

use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, CorsLayer};

use crate::config::Config;
use crate::session::{CreateRequest, CurrentView, Session, SessionError, SessionStore, SlotDecision};
use crate::{exit, CliError};

#[derive(Debug, Serialize, Deserialize)]
pub struct Created {
    pub session_id: String,
    pub element_count: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DecisionRequest {
    pub decisions: Vec<SlotDecision>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DecisionResponse {
    /// The element was fully decided and the cursor moved on.
    pub advanced: bool,
    pub current: CurrentView,
}

pub struct ApiError(SessionError);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            SessionError::NotFound(_) => StatusCode::NOT_FOUND,
            SessionError::Conflict(_) => StatusCode::CONFLICT,
            SessionError::Invalid(_) => StatusCode::UNPROCESSABLE_ENTITY,
            SessionError::Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(serde_json::json!({ "error": self.0.to_string() }))).into_response()
    }
}

async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, SessionError> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(SessionError::Storage(format!("session task failed: {e}"))))?
        .map_err(ApiError)
}

/// Runs `f` on session `id`, opening it from the state directory if needed.
async fn with_session<T, F>(store: Arc<SessionStore>, id: String, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&mut Session) -> Result<T, SessionError> + Send + 'static,
{
    blocking(move || {
        let session = store.get(&id)?;
        let mut guard = session.lock().unwrap_or_else(|e| e.into_inner());
        f(&mut guard)
    })
    .await
}

async fn create(State(store): State<Arc<SessionStore>>, Json(request): Json<CreateRequest>) -> Result<Response, ApiError> {
    let created = blocking(move || {
        let session = store.create(request)?;
        let s = session.lock().unwrap_or_else(|e| e.into_inner());
        Ok(Created { session_id: s.id().to_string(), element_count: s.element_count() })
    })
    .await?;
    Ok((StatusCode::CREATED, Json(created)).into_response())
}

async fn current(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> Result<Json<CurrentView>, ApiError> {
    with_session(store, id, |s| {
        s.retry();
        Ok(s.current())
    })
    .await
    .map(Json)
}

async fn decision(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
    Json(request): Json<DecisionRequest>,
) -> Result<Json<DecisionResponse>, ApiError> {
    with_session(store, id, move |s| {
        let advanced = s.decide(&request.decisions)?;
        Ok(DecisionResponse { advanced, current: s.current() })
    })
    .await
    .map(Json)
}

async fn undo(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> Result<Json<CurrentView>, ApiError> {
    with_session(store, id, |s| {
        s.undo()?;
        Ok(s.current())
    })
    .await
    .map(Json)
}

async fn assignment(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let json = with_session(store, id, |s| Ok(s.assignment().to_json())).await?;
    Ok(([(header::CONTENT_TYPE, "application/json")], json).into_response())
}

fn cors(origin: Option<&str>) -> Result<CorsLayer, String> {
    let allow = match origin {
        Some(o) => AllowOrigin::exact(HeaderValue::from_str(o).map_err(|e| format!("bad CORS origin `{o}`: {e}"))?),
        None => AllowOrigin::any(),
    };
    Ok(CorsLayer::new()
        .allow_origin(allow)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE]))
}

/// The session service routes.
pub fn router(store: Arc<SessionStore>, cors_origin: Option<&str>) -> Result<Router, String> {
    Ok(Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}/current", get(current))
        .route("/sessions/{id}/decision", post(decision))
        .route("/sessions/{id}/assignment", get(assignment))
        .route("/sessions/{id}/undo", post(undo))
        .with_state(store)
        .layer(cors(cors_origin)?))
}

/// Serves until interrupted.
pub fn serve_blocking(config: Config, project: Option<PathBuf>, second_pass: bool) -> Result<(), CliError> {
    let addr = format!("{}:{}", config.host, config.port);
    let cors_origin = config.cors_origin.clone();
    let store = Arc::new(SessionStore::new(config, project, second_pass));
    let app = router(store, cors_origin.as_deref()).map_err(|e| CliError::new(exit::BAD_ARGS, e))?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::new(exit::OTHER, e.to_string()))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| CliError::new(exit::OTHER, format!("cannot listen on {addr}: {e}")))?;
        log::info!("serving review sessions on http://{addr}");
        eprintln!("listening on http://{addr}");
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| CliError::new(exit::OTHER, e.to_string()))
    })
}
