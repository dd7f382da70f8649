//! JSON-over-HTTP chat service.
//!
//! | method | path | response |
//! |---|---|---|
//! | `POST` | `/api/sessions` | 201 `{session_id, greeting}` |
//! | `POST` | `/api/sessions/{id}/messages` | 200 turn result |
//! | `GET` | `/api/sessions/{id}` | transcript |
//! | `GET` | `/api/sessions/{id}/events` | 501, reserved |
//! | `GET` | `/api/skill` | skill summary |
//! | `GET` | `/healthz` | `{status, skill_name, lexicon_version}` |
//!
//! Every failure is an [`ApiError`] body. Turn results carry diagnostics
//! unless the request has `?diagnostics=false`.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, CorsLayer};

use crate::pipeline::{Engine, EngineError, TurnInput, TurnResult};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub status: u16,
    pub code: String,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status: status.as_u16(),
            code: code.to_string(),
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let status = match &e {
            EngineError::SessionNotFound(_) => StatusCode::NOT_FOUND,
            EngineError::UnsupportedLanguage(_) => StatusCode::BAD_REQUEST,
            EngineError::Transcription(_) => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSessionRequest {
    #[serde(default)]
    pub language: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateSessionResponse {
    pub session_id: String,
    pub greeting: TurnResult,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub skill_name: String,
    pub lexicon_version: String,
}

#[derive(Debug, Deserialize)]
struct TurnQuery {
    diagnostics: Option<String>,
}

impl TurnQuery {
    fn apply(&self, mut result: TurnResult) -> Result<TurnResult, ApiError> {
        match self.diagnostics.as_deref() {
            None | Some("true") | Some("1") => {}
            Some("false") | Some("0") => result.diagnostics = None,
            Some(other) => {
                return Err(ApiError::new(
                    StatusCode::BAD_REQUEST,
                    "bad_request",
                    format!("diagnostics must be true or false, got '{other}'"),
                ))
            }
        }
        Ok(result)
    }
}

fn parse_body<T: serde::de::DeserializeOwned + Default>(body: &Bytes) -> Result<T, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| {
        ApiError::new(
            StatusCode::BAD_REQUEST,
            "bad_request",
            format!("invalid request body: {e}"),
        )
    })
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, EngineError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(ApiError::from)
}

async fn create_session(
    State(engine): State<Arc<Engine>>,
    Query(query): Query<TurnQuery>,
    body: Bytes,
) -> Result<(StatusCode, Json<CreateSessionResponse>), ApiError> {
    let request: CreateSessionRequest = parse_body(&body)?;
    let (session_id, greeting) =
        blocking(move || engine.create_session(request.language.as_deref())).await?;
    let greeting = query.apply(greeting)?;
    Ok((
        StatusCode::CREATED,
        Json(CreateSessionResponse {
            session_id,
            greeting,
        }),
    ))
}

async fn post_message(
    State(engine): State<Arc<Engine>>,
    Path(id): Path<String>,
    Query(query): Query<TurnQuery>,
    body: Bytes,
) -> Result<Json<TurnResult>, ApiError> {
    // the ticket is taken before any await so turns keep arrival order
    let ticket = engine.reserve_turn(&id)?;
    let input: TurnInput = match parse_body(&body) {
        Ok(input) => input,
        Err(e) => {
            tokio::task::spawn_blocking(move || drop(ticket));
            return Err(e);
        }
    };
    let result = blocking(move || ticket.process(&engine, input)).await?;
    Ok(Json(query.apply(result)?))
}

async fn get_session(
    State(engine): State<Arc<Engine>>,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    Ok(Json(engine.transcript(&id)?).into_response())
}

async fn session_events(
    State(engine): State<Arc<Engine>>,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    engine.transcript(&id)?;
    Err(ApiError::new(
        StatusCode::NOT_IMPLEMENTED,
        "not_implemented",
        "session events are reserved for a future version",
    ))
}

async fn skill(State(engine): State<Arc<Engine>>) -> Response {
    Json(engine.skill_summary()).into_response()
}

async fn health(State(engine): State<Arc<Engine>>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        skill_name: engine.assets().skill.name.clone(),
        lexicon_version: engine.assets().lexicon.version().to_string(),
    })
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

async fn method_not_allowed() -> ApiError {
    ApiError::new(
        StatusCode::METHOD_NOT_ALLOWED,
        "method_not_allowed",
        "method not allowed on this endpoint",
    )
}

fn cors(origin: Option<&str>) -> Option<CorsLayer> {
    let origin = origin?;
    let allow = if origin == "*" {
        AllowOrigin::any()
    } else {
        AllowOrigin::exact(HeaderValue::from_str(origin).ok()?)
    };
    Some(
        CorsLayer::new()
            .allow_origin(allow)
            .allow_methods([Method::GET, Method::POST])
            .allow_headers([axum::http::header::CONTENT_TYPE]),
    )
}

pub fn router(engine: Arc<Engine>) -> Router {
    let origin = engine.config().cors_origin.clone();
    let router = Router::new()
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}", get(get_session))
        .route("/api/sessions/{id}/messages", post(post_message))
        .route("/api/sessions/{id}/events", get(session_events))
        .route("/api/skill", get(skill))
        .route("/healthz", get(health))
        .fallback(not_found)
        .method_not_allowed_fallback(method_not_allowed)
        .with_state(engine);
    match cors(origin.as_deref()) {
        Some(layer) => router.layer(layer),
        None => router,
    }
}

/// Serve until the listener fails or the process receives Ctrl-C.
pub async fn serve(engine: Arc<Engine>, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router(engine))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
