//! Lexicon-based tone analysis.
//!
//! Each category is scored independently. For a category, the analyzer picks
//! the set of non-overlapping phrase hits with the highest combined weight and
//! scores it as a probabilistic OR, `1 - prod(1 - w)`. Emotions at or above
//! the threshold then decide the dominance outcome: none qualify, one or two
//! qualify (the strongest wins), or three or more qualify (ambiguous).

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::text::normalize_tokens;

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const MAX_PHRASE_TOKENS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToneCategory {
    Anger,
    Fear,
    Sadness,
    Joy,
    Disgust,
    Analytical,
    Confident,
    Tentative,
}

impl ToneCategory {
    pub const ALL: [ToneCategory; 8] = [
        ToneCategory::Anger,
        ToneCategory::Fear,
        ToneCategory::Sadness,
        ToneCategory::Joy,
        ToneCategory::Disgust,
        ToneCategory::Analytical,
        ToneCategory::Confident,
        ToneCategory::Tentative,
    ];

    /// Emotions in tie-break order.
    pub const EMOTIONS: [ToneCategory; 5] = [
        ToneCategory::Anger,
        ToneCategory::Fear,
        ToneCategory::Sadness,
        ToneCategory::Joy,
        ToneCategory::Disgust,
    ];

    pub const LANGUAGE_TONES: [ToneCategory; 3] = [
        ToneCategory::Analytical,
        ToneCategory::Confident,
        ToneCategory::Tentative,
    ];

    pub fn is_emotion(self) -> bool {
        Self::EMOTIONS.contains(&self)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ToneCategory::Anger => "anger",
            ToneCategory::Fear => "fear",
            ToneCategory::Sadness => "sadness",
            ToneCategory::Joy => "joy",
            ToneCategory::Disgust => "disgust",
            ToneCategory::Analytical => "analytical",
            ToneCategory::Confident => "confident",
            ToneCategory::Tentative => "tentative",
        }
    }
}

impl fmt::Display for ToneCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ToneCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown tone category '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexiconEntry {
    pub phrase: Vec<String>,
    pub category: ToneCategory,
    pub weight: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum LexiconError {
    #[error("line {line}: malformed row: {message}")]
    Malformed { line: u64, message: String },
    #[error("line {line}: weight out of range (0, 1]: {weight}")]
    WeightOutOfRange { line: u64, weight: f64 },
    #[error("line {line}: unknown category '{category}'")]
    UnknownCategory { line: u64, category: String },
    #[error("line {line}: phrase is empty after normalization")]
    EmptyPhrase { line: u64 },
    #[error("line {line}: phrase '{phrase}' has more than {MAX_PHRASE_TOKENS} tokens")]
    PhraseTooLong { line: u64, phrase: String },
    #[error("line {line}: duplicate ({phrase}, {category}), first defined on line {first_line}")]
    Duplicate {
        line: u64,
        first_line: u64,
        phrase: String,
        category: ToneCategory,
    },
}

#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
    version: String,
    by_category: HashMap<ToneCategory, HashMap<Vec<String>, f64>>,
    longest: usize,
}

impl Lexicon {
    /// Build from already-normalized entries. Line numbers in errors are
    /// 1-based entry indices.
    pub fn new(
        version: impl Into<String>,
        entries: Vec<LexiconEntry>,
    ) -> Result<Lexicon, LexiconError> {
        let mut lex = Lexicon {
            version: version.into(),
            ..Lexicon::default()
        };
        let mut first_seen = HashMap::new();
        for (i, entry) in entries.into_iter().enumerate() {
            lex.insert(entry, i as u64 + 1, &mut first_seen)?;
        }
        Ok(lex)
    }

    fn insert(
        &mut self,
        entry: LexiconEntry,
        line: u64,
        first_seen: &mut HashMap<(Vec<String>, ToneCategory), u64>,
    ) -> Result<(), LexiconError> {
        if !(entry.weight > 0.0 && entry.weight <= 1.0) {
            return Err(LexiconError::WeightOutOfRange {
                line,
                weight: entry.weight,
            });
        }
        if entry.phrase.is_empty() || entry.phrase.iter().any(|t| t.is_empty()) {
            return Err(LexiconError::EmptyPhrase { line });
        }
        if entry.phrase.len() > MAX_PHRASE_TOKENS {
            return Err(LexiconError::PhraseTooLong {
                line,
                phrase: entry.phrase.join(" "),
            });
        }
        let key = (entry.phrase.clone(), entry.category);
        if let Some(&first_line) = first_seen.get(&key) {
            return Err(LexiconError::Duplicate {
                line,
                first_line,
                phrase: entry.phrase.join(" "),
                category: entry.category,
            });
        }
        first_seen.insert(key, line);
        self.longest = self.longest.max(entry.phrase.len());
        self.by_category
            .entry(entry.category)
            .or_default()
            .insert(entry.phrase.clone(), entry.weight);
        self.entries.push(entry);
        Ok(())
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Parse the `phrase,category,weight` CSV format. A leading
/// `# version: <tag>` comment sets the version tag; other `#` lines are
/// ignored.
pub fn load_lexicon(document: &str) -> Result<Lexicon, LexiconError> {
    let version = document
        .lines()
        .filter_map(|l| l.trim().strip_prefix('#'))
        .find_map(|l| l.trim().strip_prefix("version:"))
        .map(|v| v.trim().to_string())
        .unwrap_or_else(|| "unversioned".to_string());
    let mut lex = Lexicon {
        version,
        ..Lexicon::default()
    };
    if document.trim().is_empty() {
        return Ok(lex);
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(document.as_bytes());
    let headers = reader.headers().map_err(|e| LexiconError::Malformed {
        line: 1,
        message: e.to_string(),
    })?;
    if headers.iter().collect::<Vec<_>>() != ["phrase", "category", "weight"] {
        return Err(LexiconError::Malformed {
            line: headers.position().map_or(1, |p| p.line()),
            message: "expected header 'phrase,category,weight'".into(),
        });
    }
    let mut first_seen = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| LexiconError::Malformed {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 3 {
            return Err(LexiconError::Malformed {
                line,
                message: format!("expected 3 fields, found {}", record.len()),
            });
        }
        let category =
            record[1]
                .parse::<ToneCategory>()
                .map_err(|_| LexiconError::UnknownCategory {
                    line,
                    category: record[1].to_string(),
                })?;
        let weight = record[2]
            .parse::<f64>()
            .map_err(|e| LexiconError::Malformed {
                line,
                message: format!("weight '{}': {e}", &record[2]),
            })?;
        let entry = LexiconEntry {
            phrase: normalize_tokens(&record[0]),
            category,
            weight,
        };
        lex.insert(entry, line, &mut first_seen)?;
    }
    Ok(lex)
}

/// Result of the dominance rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dominance {
    Dominant(ToneCategory),
    None,
    Ambiguous,
}

impl Dominance {
    /// Value stored in the `tone_primary` context variable.
    pub fn as_context_value(self) -> &'static str {
        match self {
            Dominance::Dominant(c) => c.as_str(),
            Dominance::None => "none",
            Dominance::Ambiguous => "ambiguous",
        }
    }
}

impl Serialize for Dominance {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_context_value())
    }
}

impl<'de> Deserialize<'de> for Dominance {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        match s.as_str() {
            "none" => Ok(Dominance::None),
            "ambiguous" => Ok(Dominance::Ambiguous),
            other => other
                .parse::<ToneCategory>()
                .ok()
                .filter(|c| c.is_emotion())
                .map(Dominance::Dominant)
                .ok_or_else(|| serde::de::Error::custom(format!("bad outcome '{other}'"))),
        }
    }
}

/// One lexicon phrase counted towards a category score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToneHit {
    pub phrase: String,
    pub category: ToneCategory,
    pub weight: f64,
    pub start: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToneAnalysis {
    pub scores: BTreeMap<ToneCategory, f64>,
    pub emotions_above_threshold: Vec<ToneCategory>,
    pub language_tones_above_threshold: Vec<ToneCategory>,
    pub outcome: Dominance,
    pub threshold: f64,
    pub hits: Vec<ToneHit>,
}

impl ToneAnalysis {
    pub fn score(&self, category: ToneCategory) -> f64 {
        self.scores.get(&category).copied().unwrap_or(0.0)
    }
}

/// Categories in `group` scoring at least `threshold`, strongest first,
/// ties in the group's declared order.
fn above_threshold(
    scores: &BTreeMap<ToneCategory, f64>,
    group: &[ToneCategory],
    threshold: f64,
) -> Vec<ToneCategory> {
    let mut out: Vec<(usize, ToneCategory, f64)> = group
        .iter()
        .enumerate()
        .filter_map(|(rank, c)| {
            let s = scores.get(c).copied().unwrap_or(0.0);
            (s >= threshold).then_some((rank, *c, s))
        })
        .collect();
    out.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
    out.into_iter().map(|(_, c, _)| c).collect()
}

/// Apply the dominance rule to a score map. Non-emotion categories are
/// ignored.
pub fn dominance(scores: &BTreeMap<ToneCategory, f64>, threshold: f64) -> Dominance {
    let qualified = above_threshold(scores, &ToneCategory::EMOTIONS, threshold);
    match qualified.len() {
        0 => Dominance::None,
        1 | 2 => Dominance::Dominant(qualified[0]),
        _ => Dominance::Ambiguous,
    }
}

/// Best non-overlapping selection of a category's phrases over `tokens`.
/// Returns (start, len, weight) hits in token order.
fn best_hits(
    tokens: &[String],
    phrases: &HashMap<Vec<String>, f64>,
    longest: usize,
) -> Vec<(usize, usize, f64)> {
    let n = tokens.len();
    // gain = -ln(1 - w); maximizing the summed gain maximizes 1 - prod(1 - w)
    let mut best = vec![0.0f64; n + 1];
    let mut choice: Vec<Option<(usize, f64)>> = vec![None; n + 1];
    for i in (0..n).rev() {
        best[i] = best[i + 1];
        for len in (1..=longest.min(n - i)).rev() {
            if let Some(&w) = phrases.get(&tokens[i..i + len]) {
                let gain = -(-w).ln_1p() + best[i + len];
                if gain > best[i] {
                    best[i] = gain;
                    choice[i] = Some((len, w));
                }
            }
        }
    }
    let mut hits = Vec::new();
    let mut i = 0;
    while i < n {
        match choice[i] {
            Some((len, w)) => {
                hits.push((i, len, w));
                i += len;
            }
            None => i += 1,
        }
    }
    hits
}

/// Score `text` (already English) against `lexicon`.
pub fn analyze_tone(text: &str, lexicon: &Lexicon, threshold: f64) -> ToneAnalysis {
    let tokens = normalize_tokens(text);
    let mut scores: BTreeMap<ToneCategory, f64> =
        ToneCategory::ALL.iter().map(|c| (*c, 0.0)).collect();
    let mut hits = Vec::new();
    for category in ToneCategory::ALL {
        let Some(phrases) = lexicon.by_category.get(&category) else {
            continue;
        };
        let chosen = best_hits(&tokens, phrases, lexicon.longest);
        let remaining: f64 = chosen.iter().map(|&(_, _, w)| 1.0 - w).product();
        scores.insert(category, (1.0 - remaining).clamp(0.0, 1.0));
        hits.extend(chosen.into_iter().map(|(start, len, weight)| ToneHit {
            phrase: tokens[start..start + len].join(" "),
            category,
            weight,
            start,
            len,
        }));
    }
    hits.sort_by(|a, b| a.start.cmp(&b.start).then(a.category.cmp(&b.category)));
    let emotions_above_threshold = above_threshold(&scores, &ToneCategory::EMOTIONS, threshold);
    let language_tones_above_threshold =
        above_threshold(&scores, &ToneCategory::LANGUAGE_TONES, threshold);
    let outcome = dominance(&scores, threshold);
    ToneAnalysis {
        scores,
        emotions_above_threshold,
        language_tones_above_threshold,
        outcome,
        threshold,
        hits,
    }
}

/// Distinct categories the lexicon can produce.
pub fn covered_categories(lexicon: &Lexicon) -> HashSet<ToneCategory> {
    lexicon.entries.iter().map(|e| e.category).collect()
}

/// The tone lexicon shipped with the crate.
pub const SHIPPED_LEXICON: &str = include_str!("../assets/tone_lexicon.csv");
