//! Local stand-in for remote translation and speech providers.
//!
//! Translation tags text with the language pair, detection uses the shipped
//! profiles, and audio is treated as UTF-8 text: `/synthesize` returns the
//! text as the audio body and `/transcribe` reads it back.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};

use crate::lang::{
    detect_language, shipped_profiles, DetectRequest, DetectResponse, LanguageProfile,
    MockTranslationProvider, TranslateRequest, TranslateResponse,
};
use crate::speech::{SynthesizeRequest, TranscribeResponse};

#[derive(Debug, Clone, Default)]
pub struct MockProviderOptions {
    /// Bearer token every request must carry.
    pub token: Option<String>,
    /// Answer every request with 503.
    pub failing: bool,
}

struct MockState {
    options: MockProviderOptions,
    profiles: Vec<LanguageProfile>,
}

type Shared = Arc<MockState>;
type Reject = (StatusCode, &'static str);

fn check(state: &MockState, headers: &HeaderMap) -> Result<(), Reject> {
    if state.options.failing {
        return Err((StatusCode::SERVICE_UNAVAILABLE, "provider unavailable"));
    }
    if let Some(token) = &state.options.token {
        let expected = format!("Bearer {token}");
        let given = headers
            .get(axum::http::header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok());
        if given != Some(expected.as_str()) {
            return Err((StatusCode::UNAUTHORIZED, "missing or wrong bearer token"));
        }
    }
    Ok(())
}

async fn translate(
    State(state): State<Shared>,
    headers: HeaderMap,
    Json(req): Json<TranslateRequest>,
) -> Result<Json<TranslateResponse>, Reject> {
    check(&state, &headers)?;
    Ok(Json(TranslateResponse {
        text: MockTranslationProvider::render(&req.text, &req.from, &req.to),
    }))
}

async fn detect(
    State(state): State<Shared>,
    headers: HeaderMap,
    Json(req): Json<DetectRequest>,
) -> Result<Json<DetectResponse>, Reject> {
    check(&state, &headers)?;
    let d = detect_language(&req.text, &state.profiles);
    Ok(Json(DetectResponse {
        language: d.language,
        confidence: d.confidence,
    }))
}

async fn transcribe(
    State(state): State<Shared>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Json<TranscribeResponse>, Reject> {
    check(&state, &headers)?;
    let text = String::from_utf8(body.to_vec())
        .map_err(|_| (StatusCode::UNPROCESSABLE_ENTITY, "audio is not decodable"))?;
    Ok(Json(TranscribeResponse {
        transcript: text.trim_end_matches(['\r', '\n']).to_string(),
        confidence: 1.0,
    }))
}

async fn synthesize(
    State(state): State<Shared>,
    headers: HeaderMap,
    Json(req): Json<SynthesizeRequest>,
) -> Result<Response, Reject> {
    check(&state, &headers)?;
    if req.text.is_empty() {
        return Err((StatusCode::BAD_REQUEST, "empty text"));
    }
    Ok(([("content-type", "audio/wav")], req.text).into_response())
}

pub fn mock_provider_router(options: MockProviderOptions) -> Router {
    let state = Arc::new(MockState {
        options,
        profiles: shipped_profiles(),
    });
    Router::new()
        .route("/translate", post(translate))
        .route("/detect", post(detect))
        .route("/transcribe", post(transcribe))
        .route("/synthesize", post(synthesize))
        .with_state(state)
}
