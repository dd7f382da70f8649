//! End-to-end checks behind the acceptance report. Each returns a short
//! description of what was observed, or the reason it failed.

use std::path::PathBuf;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::Deserialize;
use serde_json::Value;

use moodbot::eval::{load_corpus, run_eval, EXAM_STRESS_CORPUS};
use moodbot::lang::translate;
use moodbot::pipeline::TurnInput;
use moodbot::service::router;
use moodbot::tone::{analyze_tone, Dominance, ToneCategory};
use moodbot::Engine;

use super::props::SUITES;
use super::server::{agent, call, TestServer};

pub fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn asset(rel: &str) -> PathBuf {
    manifest_dir().join("assets").join(rel)
}

pub fn fixture(rel: &str) -> PathBuf {
    manifest_dir().join("tests/fixtures").join(rel)
}

pub fn chatbot() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chatbot"))
}

/// Broken skill files and the violation each must produce.
pub const BROKEN_SKILLS: &[(&str, &str)] = &[
    ("duplicate_intent.json", "duplicate_intent"),
    ("missing_fallback.json", "missing_fallback"),
    ("undeclared_entity.json", "undeclared_entity"),
    ("unreachable_node.json", "unreachable_node"),
    ("bad_condition_syntax.json", "condition_syntax"),
    ("empty_examples.json", "empty_examples"),
    ("missing_welcome.json", "missing_welcome"),
    ("undeclared_intent.json", "undeclared_intent"),
    ("misplaced_fallback.json", "misplaced_fallback"),
    ("duplicate_node_id.json", "duplicate_node_id"),
];

pub fn survey_routing_accuracy() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut reports = Vec::new();
    let mut slowest = Duration::ZERO;
    for name in ["first.json", "second.json"] {
        let report = dir.path().join(name);
        let started = Instant::now();
        let output = chatbot()
            .arg("eval")
            .arg("--skill")
            .arg(asset("exam_stress.skill.json"))
            .arg("--lexicon")
            .arg(asset("tone_lexicon.csv"))
            .arg("--corpus")
            .arg(asset("corpus/exam_stress.csv"))
            .arg("--report")
            .arg(&report)
            .output()
            .map_err(|e| e.to_string())?;
        slowest = slowest.max(started.elapsed());
        if !output.status.success() {
            return Err(format!(
                "eval exited with {:?}: {}",
                output.status.code(),
                String::from_utf8_lossy(&output.stderr)
            ));
        }
        reports.push(std::fs::read(&report).map_err(|e| e.to_string())?);
    }
    if reports[0] != reports[1] {
        return Err("two runs produced different reports".into());
    }
    if slowest >= Duration::from_secs(2) {
        return Err(format!("eval took {slowest:?}"));
    }
    let json: Value = serde_json::from_slice(&reports[0]).map_err(|e| e.to_string())?;
    let trials = json["trials"].as_u64().unwrap_or(0);
    let correct = json["correct"].as_u64().unwrap_or(0);
    let accuracy = json["accuracy"].as_f64().unwrap_or(0.0);
    if trials != 17 {
        return Err(format!("expected 17 trials, report has {trials}"));
    }
    if correct < 13 || accuracy < 0.765 {
        return Err(format!(
            "{correct}/{trials} correct, accuracy {accuracy:.3}"
        ));
    }
    Ok(format!(
        "{correct}/{trials} correct, accuracy {accuracy:.3}, slowest run {} ms, reports byte-identical",
        slowest.as_millis()
    ))
}

pub fn ambiguity_failure_mode() -> Result<String, String> {
    let engine = Engine::shipped();
    let analysis = analyze_tone(
        "Bad",
        &engine.assets().lexicon,
        engine.config().tone_threshold,
    );
    let emotions = &analysis.emotions_above_threshold;
    for needed in [
        ToneCategory::Anger,
        ToneCategory::Fear,
        ToneCategory::Sadness,
    ] {
        if !emotions.contains(&needed) {
            return Err(format!("{needed:?} is not above threshold: {emotions:?}"));
        }
    }
    if analysis.outcome != Dominance::Ambiguous {
        return Err(format!("outcome was {:?}", analysis.outcome));
    }
    let trials = load_corpus(EXAM_STRESS_CORPUS).map_err(|e| e.to_string())?;
    let report = run_eval(&trials, &engine).map_err(|e| e.to_string())?;
    let row = report
        .rows
        .iter()
        .find(|r| r.utterance == "Bad")
        .ok_or("corpus has no \"Bad\" trial")?;
    if row.correct || row.expected_route.as_str() != "angry" {
        return Err(format!("\"Bad\" row scored {row:?}"));
    }
    if row.fired_node != "clarify" {
        return Err(format!(
            "\"Bad\" fired {} instead of clarify",
            row.fired_node
        ));
    }
    let (id, _) = engine.create_session(None).map_err(|e| e.to_string())?;
    let reply = engine
        .process_turn(&id, TurnInput::text("Bad"))
        .map_err(|e| e.to_string())?;
    let d = reply.diagnostics.ok_or("no diagnostics")?;
    if d.tone_primary != "ambiguous" {
        return Err(format!("tone_primary was {}", d.tone_primary));
    }
    Ok(format!(
        "\"Bad\" -> {} emotions above threshold, ambiguous, clarification reply, scored incorrect",
        emotions.len()
    ))
}

#[derive(Debug, Deserialize)]
struct Golden {
    conversations: Vec<Conversation>,
}

#[derive(Debug, Deserialize)]
struct Conversation {
    name: String,
    turns: Vec<GoldenTurn>,
}

#[derive(Debug, Deserialize)]
struct GoldenTurn {
    say: Option<String>,
    node: String,
    tone: Option<String>,
    reply: String,
}

pub fn dialog_tree_golden() -> Result<String, String> {
    let golden: Golden = serde_json::from_str(include_str!("../golden/dialog_tree.json"))
        .map_err(|e| e.to_string())?;
    let engine = Engine::shipped();
    let mut turns = 0;
    for conversation in &golden.conversations {
        let (id, greeting) = engine.create_session(None).map_err(|e| e.to_string())?;
        for (i, turn) in conversation.turns.iter().enumerate() {
            let result = match &turn.say {
                None => greeting.clone(),
                Some(text) => engine
                    .process_turn(&id, TurnInput::text(text.as_str()))
                    .map_err(|e| e.to_string())?,
            };
            let d = result.diagnostics.as_ref().ok_or("no diagnostics")?;
            let fail = |what: String| format!("{} (turn {i}): {what}", conversation.name);
            if d.fired_node.as_deref() != Some(turn.node.as_str()) {
                return Err(fail(format!(
                    "fired {:?}, expected {}",
                    d.fired_node, turn.node
                )));
            }
            if let Some(tone) = &turn.tone {
                if &d.tone_primary != tone {
                    return Err(fail(format!("tone {}, expected {tone}", d.tone_primary)));
                }
            }
            if result.reply != turn.reply {
                return Err(fail(format!("reply {:?}", result.reply)));
            }
            turns += 1;
        }
    }
    if !golden.conversations[0].turns[0]
        .reply
        .contains("How are you feeling about exams?")
    {
        return Err("greeting does not ask how the user feels about exams".into());
    }
    Ok(format!(
        "{} conversations, {turns} turns match the golden transcript",
        golden.conversations.len()
    ))
}

pub fn property_suites(cases: u32) -> Vec<(&'static str, Result<String, String>)> {
    SUITES
        .iter()
        .map(|suite| {
            let started = Instant::now();
            let outcome = (suite.check)(cases)
                .map(|()| format!("{cases} cases, {} ms", started.elapsed().as_millis()));
            (suite.name, outcome)
        })
        .collect()
}

pub fn multilingual_turn() -> Result<String, String> {
    let engine = Engine::shipped();
    let table = &engine.assets().phrase_table;
    let spanish = table
        .lookup("I am stressed", "en", "es")
        .ok_or("phrase table has no es row for \"I am stressed\"")?
        .to_string();

    let (en_id, _) = engine.create_session(None).map_err(|e| e.to_string())?;
    let english = engine
        .process_turn(&en_id, TurnInput::text("I am stressed"))
        .map_err(|e| e.to_string())?;
    let (es_id, _) = engine.create_session(None).map_err(|e| e.to_string())?;
    let translated = engine
        .process_turn(&es_id, TurnInput::text(spanish.as_str()))
        .map_err(|e| e.to_string())?;

    let en_node = english
        .diagnostics
        .as_ref()
        .and_then(|d| d.fired_node.clone());
    let es_diag = translated.diagnostics.as_ref().ok_or("no diagnostics")?;
    if es_diag.fired_node != en_node {
        return Err(format!(
            "es fired {:?}, en fired {en_node:?}",
            es_diag.fired_node
        ));
    }
    if translated.reply_language != "es" || es_diag.detected_language != "es" {
        return Err(format!(
            "reply language {}, detected {}",
            translated.reply_language, es_diag.detected_language
        ));
    }
    let expected = translate(&english.reply, "en", "es", table, None);
    if !expected.fully_translated || translated.reply != expected.text {
        return Err(format!("es reply {:?}", translated.reply));
    }
    Ok(format!(
        "{spanish:?} detected as es, fired {}, replied in es",
        en_node.unwrap_or_default()
    ))
}

pub fn skill_validation_fixtures() -> Result<String, String> {
    if BROKEN_SKILLS.len() < 6 {
        return Err("fewer than six broken skills".into());
    }
    for (file, code) in BROKEN_SKILLS {
        let path = fixture(&format!("broken/{file}"));
        let output = chatbot()
            .args(["validate", "--json", "--skill"])
            .arg(&path)
            .output()
            .map_err(|e| e.to_string())?;
        if output.status.code() != Some(1) {
            return Err(format!("{file}: exit code {:?}", output.status.code()));
        }
        let report: Value = serde_json::from_slice(&output.stdout)
            .map_err(|e| format!("{file}: report is not JSON: {e}"))?;
        let codes: Vec<&str> = report["violations"]
            .as_array()
            .map(|v| v.iter().filter_map(|x| x["code"].as_str()).collect())
            .unwrap_or_default();
        if !codes.contains(code) {
            return Err(format!("{file}: expected {code}, got {codes:?}"));
        }
    }
    let valid = chatbot()
        .args(["validate", "--skill"])
        .arg(fixture("valid.skill.json"))
        .status()
        .map_err(|e| e.to_string())?;
    if !valid.success() {
        return Err("the unbroken fixture failed validation".into());
    }
    Ok(format!(
        "{} broken skills each report their violation and exit 1",
        BROKEN_SKILLS.len()
    ))
}

pub fn service_without_secondary() -> Result<String, String> {
    let server = TestServer::start(router(Arc::new(Engine::shipped())));
    let http = agent();
    let (status, created) = call(&http, "POST", &server.url("/api/sessions"), Some("{}"));
    if status != 201 {
        return Err(format!("create returned {status}"));
    }
    let id = created["session_id"].as_str().ok_or("no session id")?;
    let (status, turn) = call(
        &http,
        "POST",
        &server.url(&format!("/api/sessions/{id}/messages")),
        Some(r#"{"text": "I am stressed"}"#),
    );
    if status != 200 || turn["diagnostics"]["tone_primary"] != "fear" {
        return Err(format!("message returned {status}: {turn}"));
    }
    Ok("session created and message routed over plain HTTP, no web client built".into())
}
