//! Phrase-table translation with longest-match segmentation.
//!
//! Every row is usable in both directions: `en,es,X,Y` also translates the
//! normalized form of `Y` from es back to `X` verbatim.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::TranslationProvider;
use crate::text::{normalize_tokens, tokenize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhraseRow {
    pub source_lang: String,
    pub target_lang: String,
    pub source_phrase: String,
    pub target_phrase: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PhraseTableError {
    #[error("line {line}: malformed row: {message}")]
    Malformed { line: u64, message: String },
    #[error("line {line}: phrase is empty after normalization")]
    EmptyPhrase { line: u64 },
    #[error("line {line}: '{phrase}' ({from}->{to}) is already defined on line {first_line}")]
    Duplicate {
        line: u64,
        first_line: u64,
        from: String,
        to: String,
        phrase: String,
    },
}

type PairIndex = HashMap<Vec<String>, (String, u64)>;

#[derive(Debug, Clone, Default)]
pub struct PhraseTable {
    rows: Vec<PhraseRow>,
    index: HashMap<(String, String), PairIndex>,
    longest: usize,
}

impl PhraseTable {
    pub fn new(rows: Vec<PhraseRow>) -> Result<Self, PhraseTableError> {
        let mut table = PhraseTable::default();
        for (i, row) in rows.into_iter().enumerate() {
            table.insert(row, i as u64 + 1)?;
        }
        Ok(table)
    }

    fn add(
        &mut self,
        from: &str,
        to: &str,
        phrase: &str,
        output: &str,
        line: u64,
    ) -> Result<(), PhraseTableError> {
        let key = normalize_tokens(phrase);
        if key.is_empty() {
            return Err(PhraseTableError::EmptyPhrase { line });
        }
        let pair = self
            .index
            .entry((from.to_string(), to.to_string()))
            .or_default();
        if let Some((_, first_line)) = pair.get(&key) {
            return Err(PhraseTableError::Duplicate {
                line,
                first_line: *first_line,
                from: from.into(),
                to: to.into(),
                phrase: key.join(" "),
            });
        }
        self.longest = self.longest.max(key.len());
        pair.insert(key, (output.to_string(), line));
        Ok(())
    }

    fn insert(&mut self, row: PhraseRow, line: u64) -> Result<(), PhraseTableError> {
        if row.source_lang.is_empty() || row.target_lang.is_empty() {
            return Err(PhraseTableError::Malformed {
                line,
                message: "language codes must not be empty".into(),
            });
        }
        self.add(
            &row.source_lang,
            &row.target_lang,
            &row.source_phrase,
            &row.target_phrase,
            line,
        )?;
        self.add(
            &row.target_lang,
            &row.source_lang,
            &row.target_phrase,
            &row.source_phrase,
            line,
        )?;
        self.rows.push(row);
        Ok(())
    }

    pub fn rows(&self) -> &[PhraseRow] {
        &self.rows
    }

    pub fn lookup(&self, phrase: &str, from: &str, to: &str) -> Option<&str> {
        self.index
            .get(&(from.to_string(), to.to_string()))?
            .get(&normalize_tokens(phrase))
            .map(|(out, _)| out.as_str())
    }

    /// Languages that appear in any row.
    pub fn languages(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .rows
            .iter()
            .flat_map(|r| [r.source_lang.clone(), r.target_lang.clone()])
            .collect();
        out.sort();
        out.dedup();
        out
    }
}

/// Parse the `source_lang,target_lang,source_phrase,target_phrase` format.
pub fn load_phrase_table(document: &str) -> Result<PhraseTable, PhraseTableError> {
    let mut table = PhraseTable::default();
    if document.trim().is_empty() {
        return Ok(table);
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(document.as_bytes());
    let headers = reader.headers().map_err(|e| PhraseTableError::Malformed {
        line: 1,
        message: e.to_string(),
    })?;
    if headers.iter().collect::<Vec<_>>()
        != [
            "source_lang",
            "target_lang",
            "source_phrase",
            "target_phrase",
        ]
    {
        return Err(PhraseTableError::Malformed {
            line: 1,
            message: "expected header 'source_lang,target_lang,source_phrase,target_phrase'".into(),
        });
    }
    for record in reader.records() {
        let record = record.map_err(|e| PhraseTableError::Malformed {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 4 {
            return Err(PhraseTableError::Malformed {
                line,
                message: format!("expected 4 fields, found {}", record.len()),
            });
        }
        table.insert(
            PhraseRow {
                source_lang: record[0].trim().to_string(),
                target_lang: record[1].trim().to_string(),
                source_phrase: record[2].to_string(),
                target_phrase: record[3].to_string(),
            },
            line,
        )?;
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    TableHit,
    PassThrough,
    Provider,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub source: String,
    pub output: String,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationResult {
    pub text: String,
    pub fully_translated: bool,
    pub segments: Vec<Segment>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl TranslationResult {
    fn identity(text: &str) -> Self {
        TranslationResult {
            text: text.to_string(),
            fully_translated: true,
            segments: Vec::new(),
            warnings: Vec::new(),
        }
    }
}

/// Translate `text` from `from` to `to`. Segments the table cannot cover go
/// to `provider` when one is given and are otherwise passed through.
pub fn translate(
    text: &str,
    from: &str,
    to: &str,
    table: &PhraseTable,
    provider: Option<&dyn TranslationProvider>,
) -> TranslationResult {
    if from == to {
        return TranslationResult::identity(text);
    }
    let tokens = tokenize(text);
    let keys: Vec<String> = tokens.iter().map(|t| t.text.clone()).collect();
    let pair = table.index.get(&(from.to_string(), to.to_string()));

    // (token range, table output) for hits; None for uncovered runs
    let mut pieces: Vec<(usize, usize, Option<String>)> = Vec::new();
    let mut i = 0;
    while i < keys.len() {
        let hit = pair.and_then(|pair| {
            (1..=table.longest.min(keys.len() - i))
                .rev()
                .find_map(|len| {
                    pair.get(&keys[i..i + len])
                        .map(|(out, _)| (len, out.clone()))
                })
        });
        match hit {
            Some((len, out)) => {
                pieces.push((i, i + len, Some(out)));
                i += len;
            }
            None => {
                match pieces.last_mut() {
                    Some((_, end, None)) => *end = i + 1,
                    _ => pieces.push((i, i + 1, None)),
                }
                i += 1;
            }
        }
    }

    let mut segments = Vec::with_capacity(pieces.len());
    let mut warnings = Vec::new();
    for (idx, (start, end, out)) in pieces.iter().enumerate() {
        match out {
            Some(out) => segments.push(Segment {
                source: text[tokens[*start].start..tokens[end - 1].end].to_string(),
                output: out.clone(),
                provenance: Provenance::TableHit,
            }),
            None => {
                // uncovered runs keep the punctuation around them
                let lo = if idx == 0 { 0 } else { tokens[*start].start };
                let hi = if idx + 1 == pieces.len() {
                    text.len()
                } else {
                    tokens[end - 1].end
                };
                let source = text[lo..hi].trim().to_string();
                let delegated = provider.map(|p| p.translate(&source, from, to));
                let segment = match delegated {
                    Some(Ok(output)) => Segment {
                        source,
                        output,
                        provenance: Provenance::Provider,
                    },
                    Some(Err(e)) => {
                        warnings.push(format!("translation provider failed, passing through: {e}"));
                        Segment {
                            output: source.clone(),
                            source,
                            provenance: Provenance::PassThrough,
                        }
                    }
                    None => Segment {
                        output: source.clone(),
                        source,
                        provenance: Provenance::PassThrough,
                    },
                };
                segments.push(segment);
            }
        }
    }
    let text_out = if segments.is_empty() {
        text.trim().to_string()
    } else {
        segments
            .iter()
            .map(|s| s.output.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    };
    TranslationResult {
        text: text_out,
        fully_translated: segments
            .iter()
            .all(|s| s.provenance != Provenance::PassThrough),
        segments,
        warnings,
    }
}
