//! Speech-to-text and text-to-speech adapter contracts.
//!
//! The mock adapter stands in for a real recognizer using sidecar files:
//! the transcript of `clip.wav` is the content of `clip.wav.txt`, and
//! synthesis writes the spoken text to such a sidecar.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::lang::ProviderError;

pub const AUDIO_FORMATS: [&str; 5] = ["wav", "mp3", "ogg", "flac", "webm"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AudioRef {
    pub locator: String,
    pub format: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub language: Option<String>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum AudioRefRepr {
    Locator(String),
    Full {
        locator: String,
        #[serde(default)]
        format: Option<String>,
        #[serde(default)]
        language: Option<String>,
    },
}

impl<'de> Deserialize<'de> for AudioRef {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let (locator, format, language) = match AudioRefRepr::deserialize(d)? {
            AudioRefRepr::Locator(l) => (l, None, None),
            AudioRefRepr::Full {
                locator,
                format,
                language,
            } => (locator, format, language),
        };
        let audio = match format {
            Some(format) => AudioRef {
                locator,
                format,
                language,
            },
            None => AudioRef::from_locator(&locator).with_language(language),
        };
        audio.validate().map_err(serde::de::Error::custom)?;
        Ok(audio)
    }
}

impl AudioRef {
    /// Format is taken from the locator's extension, defaulting to wav.
    pub fn from_locator(locator: &str) -> AudioRef {
        let format = Path::new(locator)
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .filter(|e| AUDIO_FORMATS.contains(&e.as_str()))
            .unwrap_or_else(|| "wav".to_string());
        AudioRef {
            locator: locator.to_string(),
            format,
            language: None,
        }
    }

    pub fn with_language(mut self, language: Option<String>) -> Self {
        self.language = language;
        self
    }

    pub fn validate(&self) -> Result<(), SpeechError> {
        if self.locator.trim().is_empty() {
            return Err(SpeechError::InvalidAudio("empty locator".into()));
        }
        if !AUDIO_FORMATS.contains(&self.format.as_str()) {
            return Err(SpeechError::InvalidAudio(format!(
                "unsupported format '{}'",
                self.format
            )));
        }
        Ok(())
    }

    fn sidecar(&self) -> PathBuf {
        PathBuf::from(format!("{}.txt", self.locator))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeechResult {
    pub transcript: String,
    pub confidence: f64,
    pub provider: String,
}

#[derive(Debug, Error)]
pub enum SpeechError {
    #[error("unresolvable audio reference '{0}'")]
    Unresolvable(String),
    #[error("invalid audio reference: {0}")]
    InvalidAudio(String),
    #[error("empty text")]
    EmptyText,
    #[error("speech provider failed: {0}")]
    Provider(#[from] ProviderError),
    #[error("speech output could not be written: {0}")]
    Io(#[from] std::io::Error),
}

pub trait SpeechAdapter: Send + Sync {
    fn name(&self) -> &str;
    fn transcribe(&self, audio: &AudioRef) -> Result<SpeechResult, SpeechError>;
    fn synthesize(&self, text: &str, language: &str) -> Result<AudioRef, SpeechError>;
}

/// Stable file stem for a synthesized utterance.
fn output_stem(text: &str, language: &str) -> String {
    let digest = Sha256::digest(format!("{language}\n{text}").as_bytes());
    let hex: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
    format!("tts-{language}-{hex}")
}

#[derive(Debug, Clone)]
pub struct MockSpeechAdapter {
    output_dir: PathBuf,
}

impl MockSpeechAdapter {
    pub fn new(output_dir: impl Into<PathBuf>) -> Self {
        Self {
            output_dir: output_dir.into(),
        }
    }
}

impl SpeechAdapter for MockSpeechAdapter {
    fn name(&self) -> &str {
        "mock"
    }

    fn transcribe(&self, audio: &AudioRef) -> Result<SpeechResult, SpeechError> {
        audio.validate()?;
        let raw = std::fs::read_to_string(audio.sidecar())
            .map_err(|_| SpeechError::Unresolvable(audio.locator.clone()))?;
        let transcript = raw
            .strip_suffix('\n')
            .map(|s| s.strip_suffix('\r').unwrap_or(s))
            .unwrap_or(&raw)
            .to_string();
        Ok(SpeechResult {
            transcript,
            confidence: 1.0,
            provider: self.name().to_string(),
        })
    }

    fn synthesize(&self, text: &str, language: &str) -> Result<AudioRef, SpeechError> {
        if text.is_empty() {
            return Err(SpeechError::EmptyText);
        }
        std::fs::create_dir_all(&self.output_dir)?;
        let path = self
            .output_dir
            .join(format!("{}.wav", output_stem(text, language)));
        let audio = AudioRef {
            locator: path.to_string_lossy().into_owned(),
            format: "wav".into(),
            language: Some(language.to_string()),
        };
        std::fs::write(audio.sidecar(), text)?;
        Ok(audio)
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TranscribeResponse {
    pub transcript: String,
    pub confidence: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SynthesizeRequest {
    pub text: String,
    pub language: String,
}

/// Adapter for a remote speech service: `POST /transcribe` with the raw
/// audio body and an `X-Audio-Format` header, `POST /synthesize
/// {text, language}` returning the audio body.
pub struct HttpSpeechAdapter {
    base_url: String,
    token: Option<String>,
    agent: ureq::Agent,
    output_dir: PathBuf,
}

impl HttpSpeechAdapter {
    pub fn new(
        base_url: &str,
        token: Option<String>,
        timeout: Duration,
        output_dir: impl Into<PathBuf>,
    ) -> Self {
        Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            token,
            agent: crate::lang::http_agent(timeout),
            output_dir: output_dir.into(),
        }
    }

    fn request(&self, path: &str) -> ureq::RequestBuilder<ureq::typestate::WithBody> {
        let mut req = self.agent.post(&format!("{}{path}", self.base_url));
        if let Some(token) = &self.token {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        req
    }
}

fn check_status(resp: &mut ureq::http::Response<ureq::Body>) -> Result<(), ProviderError> {
    let status = resp.status().as_u16();
    if (200..300).contains(&status) {
        Ok(())
    } else {
        Err(ProviderError::Refused {
            status,
            message: resp.body_mut().read_to_string().unwrap_or_default(),
        })
    }
}

impl SpeechAdapter for HttpSpeechAdapter {
    fn name(&self) -> &str {
        "http"
    }

    fn transcribe(&self, audio: &AudioRef) -> Result<SpeechResult, SpeechError> {
        audio.validate()?;
        let bytes = std::fs::read(&audio.locator)
            .map_err(|_| SpeechError::Unresolvable(audio.locator.clone()))?;
        let mut resp = self
            .request("/transcribe")
            .header("Content-Type", &format!("audio/{}", audio.format))
            .header("X-Audio-Format", &audio.format)
            .send(&bytes[..])
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        check_status(&mut resp)?;
        let body: TranscribeResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| ProviderError::BadResponse(e.to_string()))?;
        Ok(SpeechResult {
            transcript: body.transcript,
            confidence: body.confidence.clamp(0.0, 1.0),
            provider: self.name().to_string(),
        })
    }

    fn synthesize(&self, text: &str, language: &str) -> Result<AudioRef, SpeechError> {
        if text.is_empty() {
            return Err(SpeechError::EmptyText);
        }
        let mut resp = self
            .request("/synthesize")
            .send_json(&SynthesizeRequest {
                text: text.into(),
                language: language.into(),
            })
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        check_status(&mut resp)?;
        let audio = resp
            .body_mut()
            .read_to_vec()
            .map_err(|e| ProviderError::BadResponse(e.to_string()))?;
        std::fs::create_dir_all(&self.output_dir)?;
        let path = self
            .output_dir
            .join(format!("{}.wav", output_stem(text, language)));
        std::fs::write(&path, audio)?;
        Ok(AudioRef {
            locator: path.to_string_lossy().into_owned(),
            format: "wav".into(),
            language: Some(language.to_string()),
        })
    }
}
