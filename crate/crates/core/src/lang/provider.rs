//! External translation provider contract.
//!
//! Providers are synchronous request/response services. The HTTP adapter
//! speaks `POST /translate {text, from, to}` and `POST /detect {text}` with
//! optional bearer-token auth.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Detection;

pub const DEFAULT_PROVIDER_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("provider request failed: {0}")]
    Transport(String),
    #[error("provider refused the request with status {status}: {message}")]
    Refused { status: u16, message: String },
    #[error("provider returned an unreadable body: {0}")]
    BadResponse(String),
}

pub trait TranslationProvider: Send + Sync {
    fn detect(&self, text: &str) -> Result<Detection, ProviderError>;
    fn translate(&self, text: &str, from: &str, to: &str) -> Result<String, ProviderError>;
}

/// Deterministic in-process provider used in tests and by the mock server.
///
/// Translation tags the text with the language pair, `"[es>en] hola"`.
/// Detection reports the configured language with confidence 1.
#[derive(Debug, Clone)]
pub struct MockTranslationProvider {
    detect_as: String,
    fail: bool,
}

impl Default for MockTranslationProvider {
    fn default() -> Self {
        Self {
            detect_as: "en".into(),
            fail: false,
        }
    }
}

impl MockTranslationProvider {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn detecting(code: &str) -> Self {
        Self {
            detect_as: code.into(),
            fail: false,
        }
    }

    /// A provider whose every call fails.
    pub fn failing() -> Self {
        Self {
            detect_as: "en".into(),
            fail: true,
        }
    }

    pub fn render(text: &str, from: &str, to: &str) -> String {
        format!("[{from}>{to}] {text}")
    }
}

impl TranslationProvider for MockTranslationProvider {
    fn detect(&self, _text: &str) -> Result<Detection, ProviderError> {
        if self.fail {
            return Err(ProviderError::Transport("mock provider is down".into()));
        }
        Ok(Detection {
            language: self.detect_as.clone(),
            confidence: 1.0,
        })
    }

    fn translate(&self, text: &str, from: &str, to: &str) -> Result<String, ProviderError> {
        if self.fail {
            return Err(ProviderError::Transport("mock provider is down".into()));
        }
        Ok(Self::render(text, from, to))
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TranslateRequest {
    pub text: String,
    pub from: String,
    pub to: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TranslateResponse {
    pub text: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DetectRequest {
    pub text: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DetectResponse {
    pub language: String,
    pub confidence: f64,
}

pub(crate) fn http_agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into()
}

pub(crate) fn post_json<Req: Serialize, Resp: for<'de> Deserialize<'de>>(
    agent: &ureq::Agent,
    url: &str,
    token: Option<&str>,
    body: &Req,
) -> Result<Resp, ProviderError> {
    let mut req = agent.post(url);
    if let Some(token) = token {
        req = req.header("Authorization", &format!("Bearer {token}"));
    }
    let mut resp = req
        .send_json(body)
        .map_err(|e| ProviderError::Transport(e.to_string()))?;
    let status = resp.status().as_u16();
    if !(200..300).contains(&status) {
        let message = resp.body_mut().read_to_string().unwrap_or_default();
        return Err(ProviderError::Refused { status, message });
    }
    resp.body_mut()
        .read_json::<Resp>()
        .map_err(|e| ProviderError::BadResponse(e.to_string()))
}

pub struct HttpTranslationProvider {
    base_url: String,
    token: Option<String>,
    agent: ureq::Agent,
}

impl HttpTranslationProvider {
    pub fn new(base_url: &str, token: Option<String>, timeout: Duration) -> Self {
        Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            token,
            agent: http_agent(timeout),
        }
    }
}

impl TranslationProvider for HttpTranslationProvider {
    fn detect(&self, text: &str) -> Result<Detection, ProviderError> {
        let resp: DetectResponse = post_json(
            &self.agent,
            &format!("{}/detect", self.base_url),
            self.token.as_deref(),
            &DetectRequest { text: text.into() },
        )?;
        Ok(Detection {
            language: resp.language,
            confidence: resp.confidence.clamp(0.0, 1.0),
        })
    }

    fn translate(&self, text: &str, from: &str, to: &str) -> Result<String, ProviderError> {
        let resp: TranslateResponse = post_json(
            &self.agent,
            &format!("{}/translate", self.base_url),
            self.token.as_deref(),
            &TranslateRequest {
                text: text.into(),
                from: from.into(),
                to: to.into(),
            },
        )?;
        Ok(resp.text)
    }
}
