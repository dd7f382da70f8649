//! Routing-accuracy evaluation over a corpus of first replies.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pipeline::{Engine, EngineError, TurnInput};

/// Context key a routed node sets to name its route.
pub const ROUTE_KEY: &str = "route";
pub const NO_ROUTE: &str = "none";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Stressed,
    Good,
    Angry,
}

impl Route {
    pub const ALL: [Route; 3] = [Route::Stressed, Route::Good, Route::Angry];

    pub fn as_str(self) -> &'static str {
        match self {
            Route::Stressed => "stressed",
            Route::Good => "good",
            Route::Angry => "angry",
        }
    }
}

impl std::str::FromStr for Route {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Route::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown route '{s}' (expected stressed, good or angry)"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalTrial {
    pub id: String,
    pub utterance: String,
    pub expected_route: Route,
    pub weight: u32,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("corpus line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Parse the `id,utterance,expected_route,weight` CSV format. Lines
/// starting with `#` are comments.
pub fn load_corpus(document: &str) -> Result<Vec<EvalTrial>, EvalError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(document.as_bytes());
    let headers = match reader.headers() {
        Ok(h) if h.is_empty() => return Err(EvalError::EmptyCorpus),
        Ok(h) => h.clone(),
        Err(e) => {
            return Err(EvalError::Malformed {
                line: 1,
                message: e.to_string(),
            })
        }
    };
    if headers.iter().collect::<Vec<_>>() != ["id", "utterance", "expected_route", "weight"] {
        return Err(EvalError::Malformed {
            line: headers.position().map_or(1, |p| p.line()),
            message: "expected header 'id,utterance,expected_route,weight'".into(),
        });
    }
    let mut trials = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| EvalError::Malformed {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let malformed = |message: String| EvalError::Malformed { line, message };
        if record.len() != 4 {
            return Err(malformed(format!(
                "expected 4 fields, found {}",
                record.len()
            )));
        }
        if record[0].is_empty() {
            return Err(malformed("empty trial id".into()));
        }
        if record[1].is_empty() {
            return Err(malformed("empty utterance".into()));
        }
        let expected_route = record[2].parse().map_err(malformed)?;
        let weight: u32 = record[3]
            .parse()
            .map_err(|e| malformed(format!("weight '{}': {e}", &record[3])))?;
        if weight == 0 {
            return Err(malformed("weight must be at least 1".into()));
        }
        trials.push(EvalTrial {
            id: record[0].to_string(),
            utterance: record[1].to_string(),
            expected_route,
            weight,
        });
    }
    if trials.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    Ok(trials)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub id: String,
    pub utterance: String,
    pub expected_route: Route,
    pub weight: u32,
    pub tone_outcome: String,
    pub emotions: Vec<String>,
    pub language_tones: Vec<String>,
    pub fired_node: String,
    pub fired_route: String,
    pub correct: bool,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub skill: String,
    pub lexicon_version: String,
    pub tone_threshold: f64,
    pub trials: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub total_weight: u64,
    pub correct_weight: u64,
    pub weighted_accuracy: f64,
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    /// Accuracy recomputed from the rows.
    pub fn row_accuracy(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().filter(|r| r.correct).count() as f64 / self.rows.len() as f64
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports always serialize");
        s.push('\n');
        s
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Run every trial as the first reply of a fresh session. Corpus order is
/// kept in the report.
pub fn run_eval(trials: &[EvalTrial], engine: &Engine) -> Result<EvalReport, EvalError> {
    if trials.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    let rows = trials
        .iter()
        .map(|t| run_trial(t, engine))
        .collect::<Result<Vec<_>, _>>()?;
    let correct = rows.iter().filter(|r| r.correct).count();
    let total_weight: u64 = rows.iter().map(|r| u64::from(r.weight)).sum();
    let correct_weight: u64 = rows
        .iter()
        .filter(|r| r.correct)
        .map(|r| u64::from(r.weight))
        .sum();
    Ok(EvalReport {
        skill: engine.assets().skill.name.clone(),
        lexicon_version: engine.assets().lexicon.version().to_string(),
        tone_threshold: engine.config().tone_threshold,
        trials: rows.len(),
        correct,
        accuracy: ratio(correct as u64, rows.len() as u64),
        total_weight,
        correct_weight,
        weighted_accuracy: ratio(correct_weight, total_weight),
        rows,
    })
}

fn run_trial(trial: &EvalTrial, engine: &Engine) -> Result<EvalRow, EvalError> {
    let (session, _) = engine.create_session(None)?;
    let result = engine.process_turn(&session, TurnInput::text(trial.utterance.clone()));
    engine.close_session(&session);
    let diagnostics = result?
        .diagnostics
        .expect("engine results always carry diagnostics");

    let fired_node = diagnostics.fired_node.clone().unwrap_or_default();
    let fired_route = engine
        .assets()
        .skill
        .node(&fired_node)
        .and_then(|n| n.context_updates.get(ROUTE_KEY))
        .cloned()
        .unwrap_or_else(|| NO_ROUTE.to_string());
    let correct = fired_route == trial.expected_route.as_str();
    let emotions: Vec<String> = diagnostics
        .tone
        .emotions_above_threshold
        .iter()
        .map(|c| c.to_string())
        .collect();
    let reason = if correct {
        String::new()
    } else {
        match diagnostics.tone_primary.as_str() {
            "ambiguous" => format!("too many emotions ({})", emotions.join(", ")),
            "none" => "no emotion detected".to_string(),
            _ => format!("routed to {fired_route}"),
        }
    };
    Ok(EvalRow {
        id: trial.id.clone(),
        utterance: trial.utterance.clone(),
        expected_route: trial.expected_route,
        weight: trial.weight,
        tone_outcome: diagnostics.tone_primary,
        emotions,
        language_tones: diagnostics
            .tone
            .language_tones_above_threshold
            .iter()
            .map(|c| c.to_string())
            .collect(),
        fired_node,
        fired_route,
        correct,
        reason,
    })
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let header = [
            "#",
            "utterance",
            "expected",
            "tones",
            "fired node",
            "correct",
            "why",
        ];
        let lines: Vec<[String; 7]> = self
            .rows
            .iter()
            .map(|r| {
                let tones: Vec<&str> = r
                    .emotions
                    .iter()
                    .chain(&r.language_tones)
                    .map(String::as_str)
                    .collect();
                [
                    r.id.clone(),
                    r.utterance.clone(),
                    r.expected_route.as_str().to_string(),
                    if tones.is_empty() {
                        "none".to_string()
                    } else {
                        tones.join(", ")
                    },
                    r.fired_node.clone(),
                    if r.correct { "yes" } else { "no" }.to_string(),
                    r.reason.clone(),
                ]
            })
            .collect();
        let mut widths = header.map(|h| h.chars().count());
        for line in &lines {
            for (w, cell) in widths.iter_mut().zip(line) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let write_line = |f: &mut fmt::Formatter<'_>, cells: &[&str]| -> fmt::Result {
            let padded: Vec<String> = cells
                .iter()
                .zip(widths)
                .map(|(c, w)| format!("{c:<w$}"))
                .collect();
            writeln!(f, "{}", padded.join("  ").trim_end())
        };
        write_line(f, &header)?;
        for line in &lines {
            let cells: Vec<&str> = line.iter().map(String::as_str).collect();
            write_line(f, &cells)?;
        }
        writeln!(f)?;
        writeln!(
            f,
            "accuracy: {}/{} = {:.3}",
            self.correct, self.trials, self.accuracy
        )?;
        writeln!(
            f,
            "weighted accuracy: {}/{} = {:.3}",
            self.correct_weight, self.total_weight, self.weighted_accuracy
        )
    }
}

/// The corpus shipped with the crate.
pub const EXAM_STRESS_CORPUS: &str = include_str!("../assets/corpus/exam_stress.csv");
