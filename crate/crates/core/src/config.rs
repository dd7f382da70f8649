//! Pipeline configuration: a JSON file plus `CHATBOT_*` environment
//! overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nlu::DEFAULT_MIN_CONFIDENCE;
use crate::tone::DEFAULT_THRESHOLD;

pub const ENV_PREFIX: &str = "CHATBOT_";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderEndpoint {
    pub url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub tone_threshold: f64,
    pub min_confidence: f64,
    pub supported_languages: Vec<String>,
    pub default_language: String,
    /// Asset locations; `None` selects the shipped asset.
    pub skill: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub phrase_table: Option<PathBuf>,
    pub profiles_dir: Option<PathBuf>,
    pub translation_provider: Option<ProviderEndpoint>,
    pub speech_provider: Option<ProviderEndpoint>,
    pub provider_timeout_ms: u64,
    /// Synthesize every reply through the speech adapter.
    pub speak_replies: bool,
    pub speech_output_dir: PathBuf,
    /// Append-only transcript files, one per session.
    pub transcript_dir: Option<PathBuf>,
    pub bind: String,
    pub cors_origin: Option<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            tone_threshold: DEFAULT_THRESHOLD,
            min_confidence: DEFAULT_MIN_CONFIDENCE,
            supported_languages: ["en", "es", "fr", "de"].map(String::from).to_vec(),
            default_language: "en".into(),
            skill: None,
            lexicon: None,
            phrase_table: None,
            profiles_dir: None,
            translation_provider: None,
            speech_provider: None,
            provider_timeout_ms: 5_000,
            speak_replies: false,
            speech_output_dir: PathBuf::from("speech-out"),
            transcript_dir: None,
            bind: "127.0.0.1:8080".into(),
            cors_origin: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("environment override {key}={value}: {message}")]
    Env {
        key: String,
        value: String,
        message: String,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn parse_env<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse().map_err(|e: T::Err| ConfigError::Env {
        key: key.into(),
        value: value.into(),
        message: e.to_string(),
    })
}

fn opt_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

impl PipelineConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Apply overrides from `CHATBOT_*` variables in the process environment.
    pub fn apply_process_env(&mut self) -> Result<(), ConfigError> {
        self.apply_env(std::env::vars())
    }

    pub fn apply_env<I, K, V>(&mut self, vars: I) -> Result<(), ConfigError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        for (key, value) in vars {
            let (key, value) = (key.as_ref(), value.as_ref());
            let Some(name) = key.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            match name {
                "TONE_THRESHOLD" => self.tone_threshold = parse_env(key, value)?,
                "MIN_CONFIDENCE" => self.min_confidence = parse_env(key, value)?,
                "DEFAULT_LANGUAGE" => self.default_language = value.trim().to_string(),
                "SUPPORTED_LANGUAGES" => {
                    self.supported_languages = value
                        .split(',')
                        .map(|s| s.trim().to_string())
                        .filter(|s| !s.is_empty())
                        .collect()
                }
                "SKILL" => self.skill = opt_path(value),
                "LEXICON" => self.lexicon = opt_path(value),
                "PHRASE_TABLE" => self.phrase_table = opt_path(value),
                "PROFILES_DIR" => self.profiles_dir = opt_path(value),
                "TRANSLATION_PROVIDER_URL" => {
                    let token = self.translation_provider.take().and_then(|p| p.token);
                    self.translation_provider = (!value.is_empty()).then(|| ProviderEndpoint {
                        url: value.into(),
                        token,
                    });
                }
                "TRANSLATION_PROVIDER_TOKEN" => {
                    if let Some(p) = self.translation_provider.as_mut() {
                        p.token = Some(value.into());
                    }
                }
                "SPEECH_PROVIDER_URL" => {
                    let token = self.speech_provider.take().and_then(|p| p.token);
                    self.speech_provider = (!value.is_empty()).then(|| ProviderEndpoint {
                        url: value.into(),
                        token,
                    });
                }
                "SPEECH_PROVIDER_TOKEN" => {
                    if let Some(p) = self.speech_provider.as_mut() {
                        p.token = Some(value.into());
                    }
                }
                "PROVIDER_TIMEOUT_MS" => self.provider_timeout_ms = parse_env(key, value)?,
                "SPEAK_REPLIES" => self.speak_replies = parse_env(key, value)?,
                "SPEECH_OUTPUT_DIR" => self.speech_output_dir = PathBuf::from(value),
                "TRANSCRIPT_DIR" => self.transcript_dir = opt_path(value),
                "BIND" => self.bind = value.into(),
                "CORS_ORIGIN" => self.cors_origin = (!value.is_empty()).then(|| value.into()),
                _ => {
                    return Err(ConfigError::Env {
                        key: key.into(),
                        value: value.into(),
                        message: "unknown setting".into(),
                    })
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let open_unit = |x: f64| x > 0.0 && x < 1.0;
        if !open_unit(self.tone_threshold) {
            return Err(ConfigError::Invalid(format!(
                "tone_threshold must be in (0, 1), got {}",
                self.tone_threshold
            )));
        }
        if !open_unit(self.min_confidence) {
            return Err(ConfigError::Invalid(format!(
                "min_confidence must be in (0, 1), got {}",
                self.min_confidence
            )));
        }
        if !self.supported_languages.contains(&self.default_language) {
            return Err(ConfigError::Invalid(format!(
                "default_language '{}' is not among supported languages {:?}",
                self.default_language, self.supported_languages
            )));
        }
        Ok(())
    }
}
