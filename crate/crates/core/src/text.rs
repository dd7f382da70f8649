//! Text normalization shared by tone analysis, NLU, translation and
//! language detection.
//!
//! Normalization lowercases the input, turns every non-alphanumeric
//! character into a separator and splits on the separators. Offsets into
//! the original string are kept so callers can recover surface text.

/// A normalized token with the byte range it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// Tokenize `input`, keeping byte offsets into the original string.
pub fn tokenize(input: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut start = 0;
    for (idx, ch) in input.char_indices() {
        if ch.is_alphanumeric() {
            if current.is_empty() {
                start = idx;
            }
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(Token {
                text: std::mem::take(&mut current),
                start,
                end: idx,
            });
        }
    }
    if !current.is_empty() {
        tokens.push(Token {
            text: current,
            start,
            end: input.len(),
        });
    }
    tokens
}

/// Normalized token strings only.
pub fn normalize_tokens(input: &str) -> Vec<String> {
    tokenize(input).into_iter().map(|t| t.text).collect()
}

/// Normalized form joined by single spaces; used as a lookup key.
pub fn normalize(input: &str) -> String {
    normalize_tokens(input).join(" ")
}
