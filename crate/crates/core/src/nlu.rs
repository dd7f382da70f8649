//! Intent classification and dictionary entity recognition.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::skill::Skill;
use crate::text::normalize_tokens;

pub const DEFAULT_MIN_CONFIDENCE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentMatch {
    pub intent: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityMatch {
    pub entity: String,
    pub value: String,
    /// The declared label or synonym that matched.
    pub surface: String,
    pub start: usize,
    pub len: usize,
}

type Counts = BTreeMap<String, u32>;

fn counts(tokens: &[String]) -> Counts {
    let mut out = Counts::new();
    for t in tokens {
        *out.entry(t.clone()).or_default() += 1;
    }
    out
}

fn norm(c: &Counts) -> f64 {
    c.values()
        .map(|&v| f64::from(v) * f64::from(v))
        .sum::<f64>()
        .sqrt()
}

fn cosine(a: &Counts, a_norm: f64, b: &Counts, b_norm: f64) -> f64 {
    if a_norm == 0.0 || b_norm == 0.0 {
        return 0.0;
    }
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let dot: f64 = small
        .iter()
        .filter_map(|(t, &x)| large.get(t).map(|&y| f64::from(x) * f64::from(y)))
        .sum();
    (dot / (a_norm * b_norm)).clamp(0.0, 1.0)
}

struct IntentExamples {
    name: String,
    examples: Vec<(Counts, f64)>,
}

#[derive(Debug, Clone)]
struct SurfaceForm {
    entity: String,
    value: String,
    surface: String,
}

/// Precomputed lookup structures for one skill.
pub struct NluModel {
    intents: Vec<IntentExamples>,
    dictionary: HashMap<Vec<String>, SurfaceForm>,
    longest: usize,
}

impl NluModel {
    pub fn new(skill: &Skill) -> NluModel {
        let intents = skill
            .intents
            .iter()
            .map(|intent| IntentExamples {
                name: intent.name.clone(),
                examples: intent
                    .examples
                    .iter()
                    .map(|e| {
                        let c = counts(&normalize_tokens(e));
                        let n = norm(&c);
                        (c, n)
                    })
                    .collect(),
            })
            .collect();
        let mut dictionary = HashMap::new();
        let mut longest = 0;
        for entity in &skill.entities {
            for value in &entity.values {
                for form in value.surface_forms() {
                    let key = normalize_tokens(form);
                    if key.is_empty() {
                        continue;
                    }
                    longest = longest.max(key.len());
                    // first declaration wins
                    dictionary.entry(key).or_insert_with(|| SurfaceForm {
                        entity: entity.name.clone(),
                        value: value.label.clone(),
                        surface: form.to_string(),
                    });
                }
            }
        }
        NluModel {
            intents,
            dictionary,
            longest,
        }
    }

    /// Intents whose best example cosine reaches `min_confidence`, most
    /// confident first, ties by name.
    pub fn classify(&self, text: &str, min_confidence: f64) -> Vec<IntentMatch> {
        let input = counts(&normalize_tokens(text));
        let input_norm = norm(&input);
        if input_norm == 0.0 {
            return Vec::new();
        }
        let mut out: Vec<IntentMatch> = self
            .intents
            .iter()
            .filter_map(|intent| {
                let best = intent
                    .examples
                    .iter()
                    .map(|(c, n)| cosine(&input, input_norm, c, *n))
                    .fold(0.0f64, f64::max);
                (best > 0.0 && best >= min_confidence).then(|| IntentMatch {
                    intent: intent.name.clone(),
                    confidence: best,
                })
            })
            .collect();
        out.sort_by(|a, b| {
            b.confidence
                .total_cmp(&a.confidence)
                .then_with(|| a.intent.cmp(&b.intent))
        });
        out
    }

    /// Longest-match, left-to-right, non-overlapping scan.
    pub fn entities(&self, text: &str) -> Vec<EntityMatch> {
        let tokens = normalize_tokens(text);
        let mut out = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            let max = self.longest.min(tokens.len() - i);
            let found = (1..=max)
                .rev()
                .find_map(|len| self.dictionary.get(&tokens[i..i + len]).map(|f| (len, f)));
            match found {
                Some((len, form)) => {
                    out.push(EntityMatch {
                        entity: form.entity.clone(),
                        value: form.value.clone(),
                        surface: form.surface.clone(),
                        start: i,
                        len,
                    });
                    i += len;
                }
                None => i += 1,
            }
        }
        out
    }
}

pub fn classify_intents(text: &str, skill: &Skill, min_confidence: f64) -> Vec<IntentMatch> {
    NluModel::new(skill).classify(text, min_confidence)
}

pub fn recognize_entities(text: &str, skill: &Skill) -> Vec<EntityMatch> {
    NluModel::new(skill).entities(text)
}
