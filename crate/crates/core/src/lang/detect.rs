use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::normalize_tokens;

pub const UNDETERMINED: &str = "und";
pub const DEFAULT_STOPWORD_WEIGHT: f64 = 0.6;
pub const DEFAULT_TRIGRAM_WEIGHT: f64 = 0.4;
/// Inputs with fewer letters or digits than this are undetermined.
const MIN_DETECTABLE_CHARS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub language: String,
    pub confidence: f64,
}

impl Detection {
    pub fn undetermined() -> Self {
        Detection {
            language: UNDETERMINED.to_string(),
            confidence: 0.0,
        }
    }

    pub fn is_undetermined(&self) -> bool {
        self.language == UNDETERMINED
    }
}

/// On-disk profile format.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileDocument {
    pub code: String,
    pub stopwords: Vec<String>,
    pub trigrams: BTreeMap<String, u64>,
}

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("profile is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("profile '{0}' has no stopwords")]
    NoStopwords(String),
    #[error("profile code '{0}' is not a two- or three-letter language subtag")]
    BadCode(String),
}

#[derive(Debug, Clone)]
pub struct LanguageProfile {
    code: String,
    stopwords: HashSet<String>,
    trigrams: BTreeMap<String, u64>,
    trigram_norm: f64,
}

/// Character trigrams of each case-folded token padded with one space on
/// either side.
pub fn trigram_counts(text: &str) -> BTreeMap<String, u64> {
    let mut out = BTreeMap::new();
    for token in normalize_tokens(text) {
        let padded: Vec<char> = std::iter::once(' ')
            .chain(token.chars())
            .chain(std::iter::once(' '))
            .collect();
        for w in padded.windows(3) {
            *out.entry(w.iter().collect::<String>()).or_default() += 1;
        }
    }
    out
}

fn norm(counts: &BTreeMap<String, u64>) -> f64 {
    counts
        .values()
        .map(|&c| (c as f64) * (c as f64))
        .sum::<f64>()
        .sqrt()
}

impl LanguageProfile {
    pub fn new(document: ProfileDocument) -> Result<Self, ProfileError> {
        let code_ok = (2..=3).contains(&document.code.len())
            && document.code.chars().all(|c| c.is_ascii_lowercase());
        if !code_ok {
            return Err(ProfileError::BadCode(document.code));
        }
        let stopwords: HashSet<String> = document
            .stopwords
            .iter()
            .flat_map(|w| normalize_tokens(w))
            .collect();
        if stopwords.is_empty() {
            return Err(ProfileError::NoStopwords(document.code));
        }
        let trigram_norm = norm(&document.trigrams);
        Ok(LanguageProfile {
            code: document.code,
            stopwords,
            trigrams: document.trigrams,
            trigram_norm,
        })
    }

    pub fn from_json(json: &str) -> Result<Self, ProfileError> {
        Self::new(serde_json::from_str(json)?)
    }

    /// Build a profile from sample text.
    pub fn from_sample(
        code: &str,
        stopwords: Vec<String>,
        sample: &str,
    ) -> Result<Self, ProfileError> {
        Self::new(ProfileDocument {
            code: code.to_string(),
            stopwords,
            trigrams: trigram_counts(sample),
        })
    }

    pub fn to_document(&self) -> ProfileDocument {
        let mut stopwords: Vec<String> = self.stopwords.iter().cloned().collect();
        stopwords.sort();
        ProfileDocument {
            code: self.code.clone(),
            stopwords,
            trigrams: self.trigrams.clone(),
        }
    }

    pub fn code(&self) -> &str {
        &self.code
    }

    fn stopword_ratio(&self, tokens: &[String]) -> f64 {
        if tokens.is_empty() {
            return 0.0;
        }
        let hits = tokens
            .iter()
            .filter(|t| self.stopwords.contains(*t))
            .count();
        hits as f64 / tokens.len() as f64
    }

    fn trigram_cosine(&self, counts: &BTreeMap<String, u64>, counts_norm: f64) -> f64 {
        if counts_norm == 0.0 || self.trigram_norm == 0.0 {
            return 0.0;
        }
        let dot: f64 = counts
            .iter()
            .filter_map(|(g, &c)| self.trigrams.get(g).map(|&p| c as f64 * p as f64))
            .sum();
        dot / (counts_norm * self.trigram_norm)
    }

    /// Weighted score of `text` for this language.
    pub fn score(&self, text: &str, stopword_weight: f64, trigram_weight: f64) -> f64 {
        let tokens = normalize_tokens(text);
        let counts = trigram_counts(text);
        stopword_weight * self.stopword_ratio(&tokens)
            + trigram_weight * self.trigram_cosine(&counts, norm(&counts))
    }
}

/// Identify the language of `text`. Matching is on case-folded text, so
/// capitalization never changes the answer.
pub fn detect_language(text: &str, profiles: &[LanguageProfile]) -> Detection {
    detect_language_weighted(
        text,
        profiles,
        DEFAULT_STOPWORD_WEIGHT,
        DEFAULT_TRIGRAM_WEIGHT,
    )
}

pub fn detect_language_weighted(
    text: &str,
    profiles: &[LanguageProfile],
    stopword_weight: f64,
    trigram_weight: f64,
) -> Detection {
    let folded = text.to_lowercase();
    let significant = folded.chars().filter(|c| c.is_alphanumeric()).count();
    if significant < MIN_DETECTABLE_CHARS || profiles.is_empty() {
        return Detection::undetermined();
    }
    let scores: Vec<f64> = profiles
        .iter()
        .map(|p| p.score(&folded, stopword_weight, trigram_weight))
        .collect();
    let total: f64 = scores.iter().sum();
    // first profile wins ties
    let (best_idx, best) =
        scores.iter().enumerate().fold(
            (0, f64::MIN),
            |acc, (i, &s)| if s > acc.1 { (i, s) } else { acc },
        );
    if best <= 0.0 || total <= 0.0 {
        return Detection::undetermined();
    }
    Detection {
        language: profiles[best_idx].code.clone(),
        confidence: (best / total).clamp(0.0, 1.0),
    }
}
