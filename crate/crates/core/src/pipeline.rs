//! End-to-end turn processing and the session store.
//!
//! A turn runs transcribe, detect, translate in, tone, NLU, dialog,
//! translate out and synthesize, in that order. Turns on one session are
//! served strictly in the order their tickets were issued.

use std::collections::{BTreeMap, HashMap};
use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard, RwLock};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assets::{AssetError, Assets};
use crate::config::{ConfigError, PipelineConfig};
use crate::dialog::{step_dialog, DialogError, SessionContext, TurnEvidence};
use crate::lang::{
    detect_language, translate, Detection, HttpTranslationProvider, TranslationProvider,
    TranslationResult, ENGLISH,
};
use crate::nlu::{EntityMatch, IntentMatch, NluModel};
use crate::skill::{validate_skill, ValidationReport};
use crate::speech::{AudioRef, HttpSpeechAdapter, MockSpeechAdapter, SpeechAdapter, SpeechResult};
use crate::tone::{analyze_tone, ToneAnalysis};

/// Context variable carrying the dominance outcome.
pub const TONE_VARIABLE: &str = "tone_primary";
/// Skill metadata key holding the reply to empty input.
pub const REPROMPT_KEY: &str = "reprompt";
pub const DEFAULT_REPROMPT: &str = "I didn't catch that. Could you say it again?";

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("session '{0}' not found")]
    SessionNotFound(String),
    #[error("language '{0}' is not supported")]
    UnsupportedLanguage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("skill is not servable:\n{0}")]
    InvalidSkill(ValidationReport),
    #[error(transparent)]
    Assets(#[from] AssetError),
    #[error("transcription failed and no text was given: {0}")]
    Transcription(String),
    #[error(transparent)]
    Dialog(#[from] DialogError),
    #[error("transcript {path}: {message}")]
    Transcript { path: PathBuf, message: String },
}

impl EngineError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            EngineError::SessionNotFound(_) => "session_not_found",
            EngineError::UnsupportedLanguage(_) => "unsupported_language",
            EngineError::Config(_) => "invalid_config",
            EngineError::InvalidSkill(_) => "invalid_skill",
            EngineError::Assets(_) => "invalid_assets",
            EngineError::Transcription(_) => "transcription_failed",
            EngineError::Dialog(_) => "dialog_failed",
            EngineError::Transcript { .. } => "transcript_error",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TurnInput {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio_ref: Option<AudioRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language: Option<String>,
}

impl TurnInput {
    pub fn text(text: impl Into<String>) -> Self {
        TurnInput {
            text: Some(text.into()),
            ..TurnInput::default()
        }
    }

    pub fn in_language(mut self, language: impl Into<String>) -> Self {
        self.language = Some(language.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Transcribe,
    Detect,
    TranslateIn,
    Tone,
    Nlu,
    Dialog,
    TranslateOut,
    Synthesize,
}

/// Where the turn's language came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LanguageSource {
    Declared,
    Detected,
    Session,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub stages: Vec<Stage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcription: Option<SpeechResult>,
    pub detected_language: String,
    pub detection_confidence: f64,
    pub language_source: LanguageSource,
    pub input_language: String,
    pub english_input: String,
    pub tone: ToneAnalysis,
    pub tone_primary: String,
    pub intents: Vec<IntentMatch>,
    pub entities: Vec<EntityMatch>,
    pub fired_node: Option<String>,
    pub node_path: Vec<String>,
    pub translation_in: TranslationResult,
    pub translation_out: TranslationResult,
    pub reprompt: bool,
    pub warnings: Vec<String>,
}

impl Diagnostics {
    /// Detection precedes tone, and tone precedes dialog.
    pub fn stages_in_order(&self) -> bool {
        self.stages.windows(2).all(|w| w[0] < w[1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnResult {
    pub reply: String,
    pub reply_language: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speech: Option<AudioRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Diagnostics>,
}

/// What a transcript line records as the cause of a result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RecordedInput {
    Create {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        language: Option<String>,
    },
    Message(TurnInput),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub input: RecordedInput,
    pub result: TurnResult,
}

/// One line of a persisted transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub ts: u64,
    pub session: String,
    pub input: RecordedInput,
    pub result: TurnResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub session_id: String,
    pub language: String,
    pub variables: BTreeMap<String, String>,
    pub position: Option<String>,
    pub turns: Vec<TranscriptEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayMismatch {
    pub turn: usize,
    pub expected: serde_json::Value,
    pub actual: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub session_id: String,
    pub turns: usize,
    pub mismatches: Vec<ReplayMismatch>,
}

impl ReplayReport {
    pub fn is_identical(&self) -> bool {
        self.mismatches.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentSummary {
    pub name: String,
    pub examples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntitySummary {
    pub name: String,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSummary {
    pub id: String,
    pub title: String,
    pub path: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillSummary {
    pub name: String,
    pub intents: Vec<IntentSummary>,
    pub entities: Vec<EntitySummary>,
    pub nodes: Vec<NodeSummary>,
    pub supported_languages: Vec<String>,
    pub default_language: String,
}

#[derive(Debug)]
struct SessionState {
    id: String,
    language: String,
    context: SessionContext,
    turns: Vec<TranscriptEntry>,
    persist: bool,
}

#[derive(Debug)]
struct SlotInner {
    serving: u64,
    state: SessionState,
}

/// A session behind a FIFO ticket lock.
#[derive(Debug)]
struct SessionSlot {
    next_ticket: AtomicU64,
    inner: Mutex<SlotInner>,
    turn_done: Condvar,
}

impl SessionSlot {
    fn new(state: SessionState) -> Self {
        SessionSlot {
            next_ticket: AtomicU64::new(0),
            inner: Mutex::new(SlotInner { serving: 0, state }),
            turn_done: Condvar::new(),
        }
    }

    fn lock(&self) -> MutexGuard<'_, SlotInner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn wait_for(&self, ticket: u64) -> MutexGuard<'_, SlotInner> {
        let mut guard = self.lock();
        while guard.serving != ticket {
            guard = self
                .turn_done
                .wait(guard)
                .unwrap_or_else(|e| e.into_inner());
        }
        guard
    }

    fn finish(&self, mut guard: MutexGuard<'_, SlotInner>) {
        guard.serving += 1;
        drop(guard);
        self.turn_done.notify_all();
    }
}

/// A place in one session's turn queue.
///
/// Dropping an unused ticket gives up its place without running a turn.
#[derive(Debug)]
pub struct TurnTicket {
    slot: Arc<SessionSlot>,
    number: u64,
    used: bool,
}

impl TurnTicket {
    /// Block until every earlier ticket on the session is done, then run
    /// the turn.
    pub fn process(mut self, engine: &Engine, input: TurnInput) -> Result<TurnResult, EngineError> {
        self.used = true;
        let mut guard = self.slot.wait_for(self.number);
        let outcome = engine.run_message(&mut guard.state, input);
        self.slot.finish(guard);
        outcome
    }
}

impl Drop for TurnTicket {
    fn drop(&mut self) {
        if !self.used {
            let guard = self.slot.wait_for(self.number);
            self.slot.finish(guard);
        }
    }
}

pub struct Engine {
    assets: Arc<Assets>,
    nlu: NluModel,
    config: PipelineConfig,
    provider: Option<Arc<dyn TranslationProvider>>,
    speech: Arc<dyn SpeechAdapter>,
    sessions: RwLock<HashMap<String, Arc<SessionSlot>>>,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("skill", &self.assets.skill.name)
            .field("lexicon", &self.assets.lexicon.version())
            .field("speech", &self.speech.name())
            .field("provider", &self.provider.is_some())
            .finish()
    }
}

fn now_millis() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

impl Engine {
    /// Build an engine over `assets`. Providers named in `config` are
    /// connected over HTTP; speech otherwise falls back to the mock adapter.
    pub fn new(assets: Assets, config: PipelineConfig) -> Result<Engine, EngineError> {
        config.validate()?;
        let report = validate_skill(&assets.skill);
        if !report.is_servable() {
            return Err(EngineError::InvalidSkill(report));
        }
        let timeout = Duration::from_millis(config.provider_timeout_ms);
        let provider = config.translation_provider.as_ref().map(|p| {
            Arc::new(HttpTranslationProvider::new(
                &p.url,
                p.token.clone(),
                timeout,
            )) as Arc<dyn TranslationProvider>
        });
        let speech: Arc<dyn SpeechAdapter> = match &config.speech_provider {
            Some(p) => Arc::new(HttpSpeechAdapter::new(
                &p.url,
                p.token.clone(),
                timeout,
                config.speech_output_dir.clone(),
            )),
            None => Arc::new(MockSpeechAdapter::new(config.speech_output_dir.clone())),
        };
        for (lang, text) in assets.translation_gaps(&config.supported_languages) {
            tracing::warn!(%lang, %text, "skill response has no phrase-table row");
        }
        Ok(Engine {
            nlu: NluModel::new(&assets.skill),
            assets: Arc::new(assets),
            config,
            provider,
            speech,
            sessions: RwLock::new(HashMap::new()),
        })
    }

    pub fn from_config(config: PipelineConfig) -> Result<Engine, EngineError> {
        let assets = Assets::load(&config)?;
        Engine::new(assets, config)
    }

    /// Shipped assets under the default configuration.
    pub fn shipped() -> Engine {
        Engine::new(Assets::shipped(), PipelineConfig::default())
            .expect("shipped assets are servable")
    }

    pub fn with_translation_provider(mut self, provider: Arc<dyn TranslationProvider>) -> Self {
        self.provider = Some(provider);
        self
    }

    pub fn with_speech_adapter(mut self, adapter: Arc<dyn SpeechAdapter>) -> Self {
        self.speech = adapter;
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn assets(&self) -> &Assets {
        &self.assets
    }

    fn supported(&self, language: &str) -> bool {
        self.config
            .supported_languages
            .iter()
            .any(|l| l == language)
    }

    fn slot(&self, id: &str) -> Result<Arc<SessionSlot>, EngineError> {
        self.sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| EngineError::SessionNotFound(id.to_string()))
    }

    /// Start a session and fire the welcome node.
    pub fn create_session(
        &self,
        language: Option<&str>,
    ) -> Result<(String, TurnResult), EngineError> {
        let id = uuid::Uuid::new_v4().to_string();
        let greeting = self.open_session(&id, language, true)?;
        Ok((id, greeting))
    }

    fn open_session(
        &self,
        id: &str,
        language: Option<&str>,
        persist: bool,
    ) -> Result<TurnResult, EngineError> {
        let lang = language.unwrap_or(&self.config.default_language);
        if !self.supported(lang) {
            return Err(EngineError::UnsupportedLanguage(lang.to_string()));
        }
        let mut state = SessionState {
            id: id.to_string(),
            language: lang.to_string(),
            context: SessionContext::default(),
            turns: Vec::new(),
            persist: persist && self.config.transcript_dir.is_some(),
        };
        let greeting = self.greet(&mut state)?;
        let input = RecordedInput::Create {
            language: language.map(str::to_string),
        };
        self.record(&mut state, input, &greeting);
        self.sessions
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(id.to_string(), Arc::new(SessionSlot::new(state)));
        Ok(greeting)
    }

    pub fn close_session(&self, id: &str) -> bool {
        self.sessions
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .remove(id)
            .is_some()
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .keys()
            .cloned()
            .collect();
        ids.sort();
        ids
    }

    /// Take the next place in the session's turn queue.
    pub fn reserve_turn(&self, session_id: &str) -> Result<TurnTicket, EngineError> {
        let slot = self.slot(session_id)?;
        let number = slot.next_ticket.fetch_add(1, Ordering::SeqCst);
        Ok(TurnTicket {
            slot,
            number,
            used: false,
        })
    }

    pub fn process_turn(
        &self,
        session_id: &str,
        input: TurnInput,
    ) -> Result<TurnResult, EngineError> {
        self.reserve_turn(session_id)?.process(self, input)
    }

    pub fn transcript(&self, session_id: &str) -> Result<Transcript, EngineError> {
        let slot = self.slot(session_id)?;
        let guard = slot.lock();
        let state = &guard.state;
        Ok(Transcript {
            session_id: state.id.clone(),
            language: state.language.clone(),
            variables: state.context.variables.clone(),
            position: state.context.position.clone(),
            turns: state.turns.clone(),
        })
    }

    pub fn skill_summary(&self) -> SkillSummary {
        let skill = &self.assets.skill;
        SkillSummary {
            name: skill.name.clone(),
            intents: skill
                .intents
                .iter()
                .map(|i| IntentSummary {
                    name: i.name.clone(),
                    examples: i.examples.len(),
                })
                .collect(),
            entities: skill
                .entities
                .iter()
                .map(|e| EntitySummary {
                    name: e.name.clone(),
                    values: e.values.iter().map(|v| v.label.clone()).collect(),
                })
                .collect(),
            nodes: skill
                .nodes()
                .into_iter()
                .map(|n| NodeSummary {
                    id: n.id.clone(),
                    title: n.title.clone(),
                    path: skill.node_path(&n.id).unwrap_or_default(),
                })
                .collect(),
            supported_languages: self.config.supported_languages.clone(),
            default_language: self.config.default_language.clone(),
        }
    }

    fn translate_out(&self, text: &str, language: &str) -> TranslationResult {
        translate(
            text,
            ENGLISH,
            language,
            &self.assets.phrase_table,
            self.provider.as_deref(),
        )
    }

    fn greet(&self, state: &mut SessionState) -> Result<TurnResult, EngineError> {
        let evidence = TurnEvidence {
            context: state.context.variables.clone(),
            is_first_turn: true,
            ..TurnEvidence::default()
        };
        let outcome = step_dialog(&self.assets.skill, &mut state.context, &evidence)?;
        let out = self.translate_out(&outcome.response, &state.language);
        let diagnostics = Diagnostics {
            stages: vec![Stage::Dialog, Stage::TranslateOut],
            transcription: None,
            detected_language: state.language.clone(),
            detection_confidence: 0.0,
            language_source: LanguageSource::Session,
            input_language: state.language.clone(),
            english_input: String::new(),
            tone: analyze_tone("", &self.assets.lexicon, self.config.tone_threshold),
            tone_primary: String::new(),
            intents: Vec::new(),
            entities: Vec::new(),
            fired_node: Some(outcome.fired_node),
            node_path: outcome.node_path,
            translation_in: translate("", ENGLISH, ENGLISH, &self.assets.phrase_table, None),
            warnings: out.warnings.clone(),
            translation_out: out,
            reprompt: false,
        };
        let mut result = TurnResult {
            reply: diagnostics.translation_out.text.clone(),
            reply_language: state.language.clone(),
            speech: None,
            diagnostics: Some(diagnostics),
        };
        if self.config.speak_replies {
            self.speak(&mut result);
        }
        Ok(result)
    }

    fn speak(&self, result: &mut TurnResult) {
        match self
            .speech
            .synthesize(&result.reply, &result.reply_language)
        {
            Ok(audio) => result.speech = Some(audio),
            Err(e) => {
                if let Some(d) = result.diagnostics.as_mut() {
                    d.warnings.push(format!("speech synthesis failed: {e}"));
                }
            }
        }
        if let Some(d) = result.diagnostics.as_mut() {
            d.stages.push(Stage::Synthesize);
        }
    }

    fn run_message(
        &self,
        state: &mut SessionState,
        input: TurnInput,
    ) -> Result<TurnResult, EngineError> {
        let result = self.run_turn(state, &input)?;
        self.record(state, RecordedInput::Message(input), &result);
        Ok(result)
    }

    fn run_turn(
        &self,
        state: &mut SessionState,
        input: &TurnInput,
    ) -> Result<TurnResult, EngineError> {
        let mut stages = Vec::new();
        let mut warnings = Vec::new();

        let declared = match input.language.as_deref() {
            Some(l) if self.supported(l) => Some(l.to_string()),
            Some(l) => return Err(EngineError::UnsupportedLanguage(l.to_string())),
            None => None,
        };

        let mut transcription = None;
        let mut text = input.text.clone().unwrap_or_default();
        if let Some(audio) = &input.audio_ref {
            stages.push(Stage::Transcribe);
            match self.speech.transcribe(audio) {
                Ok(heard) => {
                    if !heard.transcript.trim().is_empty() || text.trim().is_empty() {
                        text = heard.transcript.clone();
                    }
                    transcription = Some(heard);
                }
                Err(e) if !text.trim().is_empty() => {
                    warnings.push(format!("transcription failed, using text input: {e}"));
                }
                Err(e) => return Err(EngineError::Transcription(e.to_string())),
            }
        }

        let spoken = input.audio_ref.is_some();
        if text.trim().is_empty() {
            return Ok(self.reprompt(state, declared, stages, transcription, warnings, spoken));
        }

        stages.push(Stage::Detect);
        let mut detection = detect_language(&text, &self.assets.profiles);
        if detection.is_undetermined() && declared.is_none() {
            if let Some(provider) = &self.provider {
                match provider.detect(&text) {
                    Ok(remote) => detection = remote,
                    Err(e) => warnings.push(format!("provider language detection failed: {e}")),
                }
            }
        }
        let (language, source) = match (&declared, &detection) {
            (Some(l), _) => (l.clone(), LanguageSource::Declared),
            (None, d) if d.is_undetermined() => {
                warnings.push("language undetermined, treating input as English".into());
                (state.language.clone(), LanguageSource::Session)
            }
            (None, d) if self.supported(&d.language) => {
                (d.language.clone(), LanguageSource::Detected)
            }
            (None, d) => {
                warnings.push(format!(
                    "detected language '{}' is not supported, using session language",
                    d.language
                ));
                (state.language.clone(), LanguageSource::Session)
            }
        };
        let input_language = if source == LanguageSource::Session && detection.is_undetermined() {
            ENGLISH.to_string()
        } else {
            language.clone()
        };

        stages.push(Stage::TranslateIn);
        let translation_in = translate(
            &text,
            &input_language,
            ENGLISH,
            &self.assets.phrase_table,
            self.provider.as_deref(),
        );
        warnings.extend(translation_in.warnings.iter().cloned());
        let english = translation_in.text.clone();

        stages.push(Stage::Tone);
        let tone = analyze_tone(&english, &self.assets.lexicon, self.config.tone_threshold);
        let tone_primary = tone.outcome.as_context_value().to_string();
        state
            .context
            .variables
            .insert(TONE_VARIABLE.to_string(), tone_primary.clone());

        stages.push(Stage::Nlu);
        let intents = self.nlu.classify(&english, self.config.min_confidence);
        let entities = self.nlu.entities(&english);

        stages.push(Stage::Dialog);
        let evidence = TurnEvidence {
            intents: intents.clone(),
            entities: entities.clone(),
            context: state.context.variables.clone(),
            is_first_turn: false,
        };
        let outcome = step_dialog(&self.assets.skill, &mut state.context, &evidence)?;

        stages.push(Stage::TranslateOut);
        let translation_out = self.translate_out(&outcome.response, &language);
        warnings.extend(translation_out.warnings.iter().cloned());

        let mut result = TurnResult {
            reply: translation_out.text.clone(),
            reply_language: language,
            speech: None,
            diagnostics: Some(Diagnostics {
                stages,
                transcription,
                detected_language: detection.language,
                detection_confidence: detection.confidence,
                language_source: source,
                input_language,
                english_input: english,
                tone,
                tone_primary,
                intents,
                entities,
                fired_node: Some(outcome.fired_node),
                node_path: outcome.node_path,
                translation_in,
                translation_out,
                reprompt: false,
                warnings,
            }),
        };
        if self.config.speak_replies || spoken {
            self.speak(&mut result);
        }
        Ok(result)
    }

    fn reprompt(
        &self,
        state: &SessionState,
        declared: Option<String>,
        stages: Vec<Stage>,
        transcription: Option<SpeechResult>,
        warnings: Vec<String>,
        spoken: bool,
    ) -> TurnResult {
        let (language, source) = match declared {
            Some(l) => (l, LanguageSource::Declared),
            None => (state.language.clone(), LanguageSource::Session),
        };
        let text = self
            .assets
            .skill
            .metadata
            .get(REPROMPT_KEY)
            .map_or(DEFAULT_REPROMPT, String::as_str);
        let mut stages = stages;
        stages.push(Stage::TranslateOut);
        let out = self.translate_out(text, &language);
        let mut warnings = warnings;
        warnings.extend(out.warnings.iter().cloned());
        let undetermined = Detection::undetermined();
        let mut result = TurnResult {
            reply: out.text.clone(),
            reply_language: language.clone(),
            speech: None,
            diagnostics: Some(Diagnostics {
                stages,
                transcription,
                detected_language: undetermined.language,
                detection_confidence: undetermined.confidence,
                language_source: source,
                input_language: language,
                english_input: String::new(),
                tone: analyze_tone("", &self.assets.lexicon, self.config.tone_threshold),
                tone_primary: state
                    .context
                    .variables
                    .get(TONE_VARIABLE)
                    .cloned()
                    .unwrap_or_default(),
                intents: Vec::new(),
                entities: Vec::new(),
                fired_node: None,
                node_path: Vec::new(),
                translation_in: translate("", ENGLISH, ENGLISH, &self.assets.phrase_table, None),
                translation_out: out,
                reprompt: true,
                warnings,
            }),
        };
        if self.config.speak_replies || spoken {
            self.speak(&mut result);
        }
        result
    }

    fn transcript_path(&self, id: &str) -> Option<PathBuf> {
        self.config
            .transcript_dir
            .as_ref()
            .map(|dir| dir.join(format!("{id}.ndjson")))
    }

    fn record(&self, state: &mut SessionState, input: RecordedInput, result: &TurnResult) {
        if state.persist {
            if let Some(path) = self.transcript_path(&state.id) {
                let record = TranscriptRecord {
                    ts: now_millis(),
                    session: state.id.clone(),
                    input: input.clone(),
                    result: result.clone(),
                };
                if let Err(e) = append_record(&path, &record) {
                    tracing::warn!(path = %path.display(), error = %e, "transcript not persisted");
                }
            }
        }
        state.turns.push(TranscriptEntry {
            input,
            result: result.clone(),
        });
    }

    /// Rebuild a session from a persisted transcript, comparing every
    /// regenerated result with the recorded one. The session is registered
    /// under its recorded id; the file is not appended to while replaying.
    pub fn replay_transcript(&self, path: &Path) -> Result<ReplayReport, EngineError> {
        let records = read_records(path)?;
        let bad = |message: String| EngineError::Transcript {
            path: path.to_path_buf(),
            message,
        };
        let first = records
            .first()
            .ok_or_else(|| bad("transcript is empty".into()))?;
        let RecordedInput::Create { language } = &first.input else {
            return Err(bad("first record is not a session creation".into()));
        };
        let id = first.session.clone();
        let mut mismatches = Vec::new();
        let greeting = self.open_session(&id, language.as_deref(), false)?;
        compare(0, &first.result, &greeting, &mut mismatches);

        let slot = self.slot(&id)?;
        for (turn, record) in records.iter().enumerate().skip(1) {
            if record.session != id {
                return Err(bad(format!(
                    "line {} belongs to session '{}'",
                    turn + 1,
                    record.session
                )));
            }
            let RecordedInput::Message(input) = &record.input else {
                return Err(bad(format!("line {} creates a second session", turn + 1)));
            };
            let ticket = self.reserve_turn(&id)?;
            let actual = ticket.process(self, input.clone());
            match actual {
                Ok(actual) => compare(turn, &record.result, &actual, &mut mismatches),
                Err(e) => mismatches.push(ReplayMismatch {
                    turn,
                    expected: serde_json::to_value(&record.result).unwrap_or_default(),
                    actual: serde_json::Value::String(e.to_string()),
                }),
            }
        }
        slot.lock().state.persist = self.config.transcript_dir.is_some();
        Ok(ReplayReport {
            session_id: id,
            turns: records.len(),
            mismatches,
        })
    }

    /// Replay every transcript in the configured directory.
    pub fn restore_sessions(&self) -> Result<Vec<ReplayReport>, EngineError> {
        let Some(dir) = &self.config.transcript_dir else {
            return Ok(Vec::new());
        };
        if !dir.exists() {
            return Ok(Vec::new());
        }
        let entries = std::fs::read_dir(dir).map_err(|e| EngineError::Transcript {
            path: dir.clone(),
            message: e.to_string(),
        })?;
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "ndjson"))
            .collect();
        paths.sort();
        paths.iter().map(|p| self.replay_transcript(p)).collect()
    }
}

fn compare(turn: usize, expected: &TurnResult, actual: &TurnResult, out: &mut Vec<ReplayMismatch>) {
    let expected = serde_json::to_value(expected).unwrap_or_default();
    let actual = serde_json::to_value(actual).unwrap_or_default();
    if expected != actual {
        out.push(ReplayMismatch {
            turn,
            expected,
            actual,
        });
    }
}

fn append_record(path: &Path, record: &TranscriptRecord) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut line = serde_json::to_string(record).map_err(std::io::Error::other)?;
    line.push('\n');
    OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?
        .write_all(line.as_bytes())
}

pub fn read_records(path: &Path) -> Result<Vec<TranscriptRecord>, EngineError> {
    let text = std::fs::read_to_string(path).map_err(|e| EngineError::Transcript {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| EngineError::Transcript {
                path: path.to_path_buf(),
                message: format!("line {}: {e}", i + 1),
            })
        })
        .collect()
}
