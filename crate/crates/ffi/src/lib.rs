//! C ABI over the moodbot engine.
//!
//! Engines are opaque handles. Every call returns a [`MoodbotStatus`];
//! results come back through out-parameters as NUL-terminated UTF-8 JSON
//! owned by the caller and released with [`moodbot_string_free`]. After a
//! failed call, [`moodbot_last_error`] describes the failure on the calling
//! thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use moodbot::config::PipelineConfig;
use moodbot::pipeline::{Engine, EngineError, TurnInput};
use moodbot::skill::{parse_skill_unchecked, validate_skill, SkillError, ValidationReport};
use moodbot::tone::{analyze_tone, load_lexicon, SHIPPED_LEXICON};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoodbotStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidJson = 3,
    InvalidConfig = 4,
    InvalidSkill = 5,
    SessionNotFound = 6,
    UnsupportedLanguage = 7,
    EngineError = 8,
    Panic = 9,
}

/// Opaque engine handle.
pub struct MoodbotEngine {
    engine: Engine,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let message = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(message).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(MoodbotStatus, String);

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        let status = match &e {
            EngineError::SessionNotFound(_) => MoodbotStatus::SessionNotFound,
            EngineError::UnsupportedLanguage(_) => MoodbotStatus::UnsupportedLanguage,
            EngineError::Config(_) => MoodbotStatus::InvalidConfig,
            EngineError::InvalidSkill(_) => MoodbotStatus::InvalidSkill,
            _ => MoodbotStatus::EngineError,
        };
        Failure(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MoodbotStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MoodbotStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            MoodbotStatus::Panic
        }
    }
}

/// # Safety
/// `p` is null or a valid NUL-terminated string.
unsafe fn required_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(
            MoodbotStatus::NullArgument,
            format!("{name} is null"),
        ));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(MoodbotStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

/// # Safety
/// `p` is null or a valid NUL-terminated string.
unsafe fn optional_str<'a>(p: *const c_char, name: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        required_str(p, name).map(Some)
    }
}

fn out_ptr<T>(out: *mut T, name: &str) -> Result<(), Failure> {
    if out.is_null() {
        Err(Failure(
            MoodbotStatus::NullArgument,
            format!("{name} is null"),
        ))
    } else {
        Ok(())
    }
}

fn to_c(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " "))
        .expect("interior NULs were removed")
        .into_raw()
}

fn json<T: serde::Serialize>(value: &T) -> *mut c_char {
    to_c(serde_json::to_string(value).expect("results serialize"))
}

unsafe fn engine_ref<'a>(engine: *const MoodbotEngine) -> Result<&'a Engine, Failure> {
    engine.as_ref().map(|e| &e.engine).ok_or(Failure(
        MoodbotStatus::NullArgument,
        "engine is null".into(),
    ))
}

/// Create an engine over the shipped assets and default configuration.
///
/// # Safety
/// `out` must be a valid pointer to write the handle to.
#[no_mangle]
pub unsafe extern "C" fn moodbot_engine_new_default(out: *mut *mut MoodbotEngine) -> MoodbotStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let engine = Engine::shipped();
        *out = Box::into_raw(Box::new(MoodbotEngine { engine }));
        Ok(())
    })
}

/// Create an engine from a JSON configuration document. Asset paths in the
/// configuration are read from disk; unset ones use the shipped assets.
///
/// # Safety
/// `config_json` is a NUL-terminated string; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn moodbot_engine_from_config(
    config_json: *const c_char,
    out: *mut *mut MoodbotEngine,
) -> MoodbotStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let text = required_str(config_json, "config_json")?;
        let config: PipelineConfig = serde_json::from_str(text)
            .map_err(|e| Failure(MoodbotStatus::InvalidJson, e.to_string()))?;
        let engine = Engine::from_config(config)?;
        *out = Box::into_raw(Box::new(MoodbotEngine { engine }));
        Ok(())
    })
}

/// Release an engine. Null is ignored.
///
/// # Safety
/// `engine` is null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn moodbot_engine_free(engine: *mut MoodbotEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Start a session. `language` may be null for the default language.
/// Writes the new session id and the greeting turn result as JSON.
///
/// # Safety
/// Pointers are valid; strings are NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn moodbot_session_create(
    engine: *const MoodbotEngine,
    language: *const c_char,
    session_id_out: *mut *mut c_char,
    greeting_json_out: *mut *mut c_char,
) -> MoodbotStatus {
    guard(|| {
        let engine = engine_ref(engine)?;
        out_ptr(session_id_out, "session_id_out")?;
        out_ptr(greeting_json_out, "greeting_json_out")?;
        let language = optional_str(language, "language")?;
        let (id, greeting) = engine.create_session(language)?;
        *session_id_out = to_c(id);
        *greeting_json_out = json(&greeting);
        Ok(())
    })
}

/// Process one text message. `language` may be null to detect it.
/// Writes the turn result as JSON.
///
/// # Safety
/// Pointers are valid; strings are NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn moodbot_session_send(
    engine: *const MoodbotEngine,
    session_id: *const c_char,
    text: *const c_char,
    language: *const c_char,
    result_json_out: *mut *mut c_char,
) -> MoodbotStatus {
    guard(|| {
        let engine = engine_ref(engine)?;
        out_ptr(result_json_out, "result_json_out")?;
        let id = required_str(session_id, "session_id")?;
        let input = TurnInput {
            text: Some(required_str(text, "text")?.to_string()),
            audio_ref: None,
            language: optional_str(language, "language")?.map(str::to_string),
        };
        let result = engine.process_turn(id, input)?;
        *result_json_out = json(&result);
        Ok(())
    })
}

/// Write a session's transcript as JSON.
///
/// # Safety
/// Pointers are valid; strings are NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn moodbot_session_transcript(
    engine: *const MoodbotEngine,
    session_id: *const c_char,
    transcript_json_out: *mut *mut c_char,
) -> MoodbotStatus {
    guard(|| {
        let engine = engine_ref(engine)?;
        out_ptr(transcript_json_out, "transcript_json_out")?;
        let id = required_str(session_id, "session_id")?;
        *transcript_json_out = json(&engine.transcript(id)?);
        Ok(())
    })
}

/// Validate a skill document. The report is written as JSON whenever the
/// document parses; the status is `INVALID_SKILL` if it lists violations.
///
/// # Safety
/// Pointers are valid; strings are NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn moodbot_validate_skill(
    skill_json: *const c_char,
    report_json_out: *mut *mut c_char,
) -> MoodbotStatus {
    guard(|| {
        out_ptr(report_json_out, "report_json_out")?;
        let document = required_str(skill_json, "skill_json")?;
        let report = match parse_skill_unchecked(document) {
            Ok(skill) => validate_skill(&skill),
            Err(SkillError::Invalid(violations)) => ValidationReport { violations },
            Err(e) => return Err(Failure(MoodbotStatus::InvalidJson, e.to_string())),
        };
        *report_json_out = json(&report);
        if report.is_servable() {
            Ok(())
        } else {
            Err(Failure(
                MoodbotStatus::InvalidSkill,
                format!("{} violation(s)", report.violations.len()),
            ))
        }
    })
}

/// Score English text with the shipped lexicon. Writes the analysis as JSON.
///
/// # Safety
/// Pointers are valid; strings are NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn moodbot_analyze_tone(
    text: *const c_char,
    threshold: f64,
    analysis_json_out: *mut *mut c_char,
) -> MoodbotStatus {
    guard(|| {
        out_ptr(analysis_json_out, "analysis_json_out")?;
        let text = required_str(text, "text")?;
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Failure(
                MoodbotStatus::InvalidConfig,
                format!("threshold {threshold} is outside (0, 1)"),
            ));
        }
        let lexicon = load_lexicon(SHIPPED_LEXICON).expect("shipped lexicon is valid");
        *analysis_json_out = json(&analyze_tone(text, &lexicon, threshold));
        Ok(())
    })
}

/// Release a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` is null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn moodbot_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn moodbot_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn moodbot_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
