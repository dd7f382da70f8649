//! Node trigger conditions.
//!
//! Grammar, lowest precedence first:
//!
//! ```text
//! expr  := or
//! or    := and ("||" and)*
//! and   := unary ("&&" unary)*
//! unary := "!" unary | "(" expr ")" | prim
//! prim  := "#" ident
//!        | "@" ident [":" ident]
//!        | "$" ident ("==" | "!=") quoted-string
//!        | "welcome" | "anything_else" | "true" | "false"
//! ```
//!
//! The parser is a lexer followed by precedence climbing; both binary
//! operators are left-associative.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CompareOp {
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
}

impl CompareOp {
    pub fn as_str(self) -> &'static str {
        match self {
            CompareOp::Eq => "==",
            CompareOp::Ne => "!=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Condition {
    Intent(String),
    Entity {
        entity: String,
        value: Option<String>,
    },
    Context {
        variable: String,
        op: CompareOp,
        value: String,
    },
    Welcome,
    AnythingElse,
    Bool(bool),
    And(Box<Condition>, Box<Condition>),
    Or(Box<Condition>, Box<Condition>),
    Not(Box<Condition>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message} at offset {offset}")]
pub struct ConditionError {
    pub message: String,
    /// Byte offset into the expression text.
    pub offset: usize,
}

impl ConditionError {
    fn new(message: impl Into<String>, offset: usize) -> Self {
        Self {
            message: message.into(),
            offset,
        }
    }
}

impl Condition {
    pub fn parse(src: &str) -> Result<Condition, ConditionError> {
        let tokens = lex(src)?;
        let mut parser = Parser {
            tokens: &tokens,
            pos: 0,
            end: src.len(),
        };
        let expr = parser.expr(0)?;
        if let Some(tok) = parser.peek() {
            return Err(ConditionError::new(
                format!("unexpected {}", tok.kind.describe()),
                tok.offset,
            ));
        }
        Ok(expr)
    }

    pub fn and(lhs: Condition, rhs: Condition) -> Condition {
        Condition::And(Box::new(lhs), Box::new(rhs))
    }

    pub fn or(lhs: Condition, rhs: Condition) -> Condition {
        Condition::Or(Box::new(lhs), Box::new(rhs))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(inner: Condition) -> Condition {
        Condition::Not(Box::new(inner))
    }

    /// Visit every primitive in the tree, left to right.
    pub fn for_each_primitive<'a>(&'a self, f: &mut impl FnMut(&'a Condition)) {
        match self {
            Condition::And(a, b) | Condition::Or(a, b) => {
                a.for_each_primitive(f);
                b.for_each_primitive(f);
            }
            Condition::Not(a) => a.for_each_primitive(f),
            prim => f(prim),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Condition::Or(..) => 0,
            Condition::And(..) => 1,
            _ => 2,
        }
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, c: &Condition, min_prec: u8) -> fmt::Result {
    if c.precedence() < min_prec {
        write!(f, "({c})")
    } else {
        write!(f, "{c}")
    }
}

fn write_quoted(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_str("\"")?;
    for ch in s.chars() {
        match ch {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            c => write!(f, "{c}")?,
        }
    }
    f.write_str("\"")
}

/// Canonical surface syntax with the minimum parentheses needed to parse
/// back to the same tree.
impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::Intent(name) => write!(f, "#{name}"),
            Condition::Entity {
                entity,
                value: None,
            } => write!(f, "@{entity}"),
            Condition::Entity {
                entity,
                value: Some(v),
            } => write!(f, "@{entity}:{v}"),
            Condition::Context {
                variable,
                op,
                value,
            } => {
                write!(f, "${variable} {} ", op.as_str())?;
                write_quoted(f, value)
            }
            Condition::Welcome => f.write_str("welcome"),
            Condition::AnythingElse => f.write_str("anything_else"),
            Condition::Bool(b) => write!(f, "{b}"),
            Condition::And(a, b) => {
                write_operand(f, a, 1)?;
                f.write_str(" && ")?;
                write_operand(f, b, 2)
            }
            Condition::Or(a, b) => {
                write_operand(f, a, 0)?;
                f.write_str(" || ")?;
                write_operand(f, b, 1)
            }
            Condition::Not(a) => {
                f.write_str("!")?;
                write_operand(f, a, 2)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Hash,
    At,
    Dollar,
    Colon,
    EqEq,
    NotEq,
    AndAnd,
    OrOr,
    Bang,
    LParen,
    RParen,
    Ident(String),
    Str(String),
}

impl TokenKind {
    fn describe(&self) -> String {
        match self {
            TokenKind::Hash => "'#'".into(),
            TokenKind::At => "'@'".into(),
            TokenKind::Dollar => "'$'".into(),
            TokenKind::Colon => "':'".into(),
            TokenKind::EqEq => "'=='".into(),
            TokenKind::NotEq => "'!='".into(),
            TokenKind::AndAnd => "'&&'".into(),
            TokenKind::OrOr => "'||'".into(),
            TokenKind::Bang => "'!'".into(),
            TokenKind::LParen => "'('".into(),
            TokenKind::RParen => "')'".into(),
            TokenKind::Ident(s) => format!("identifier '{s}'"),
            TokenKind::Str(_) => "string literal".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    offset: usize,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn lex(src: &str) -> Result<Vec<Token>, ConditionError> {
    let mut out = Vec::new();
    let mut chars = src.char_indices().peekable();
    while let Some(&(offset, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        let two = |chars: &mut std::iter::Peekable<std::str::CharIndices<'_>>, second: char| {
            chars.next();
            if chars.peek().map(|&(_, c)| c) == Some(second) {
                chars.next();
                true
            } else {
                false
            }
        };
        let kind = match c {
            '#' => {
                chars.next();
                TokenKind::Hash
            }
            '@' => {
                chars.next();
                TokenKind::At
            }
            '$' => {
                chars.next();
                TokenKind::Dollar
            }
            ':' => {
                chars.next();
                TokenKind::Colon
            }
            '(' => {
                chars.next();
                TokenKind::LParen
            }
            ')' => {
                chars.next();
                TokenKind::RParen
            }
            '!' => {
                if two(&mut chars, '=') {
                    TokenKind::NotEq
                } else {
                    TokenKind::Bang
                }
            }
            '=' => {
                if two(&mut chars, '=') {
                    TokenKind::EqEq
                } else {
                    return Err(ConditionError::new("expected '=='", offset));
                }
            }
            '&' => {
                if two(&mut chars, '&') {
                    TokenKind::AndAnd
                } else {
                    return Err(ConditionError::new("expected '&&'", offset));
                }
            }
            '|' => {
                if two(&mut chars, '|') {
                    TokenKind::OrOr
                } else {
                    return Err(ConditionError::new("expected '||'", offset));
                }
            }
            '"' => {
                chars.next();
                let mut value = String::new();
                loop {
                    match chars.next() {
                        None => {
                            return Err(ConditionError::new("unterminated string", offset));
                        }
                        Some((_, '"')) => break,
                        Some((esc, '\\')) => match chars.next() {
                            Some((_, c @ ('"' | '\\'))) => value.push(c),
                            _ => return Err(ConditionError::new("invalid escape", esc)),
                        },
                        Some((_, c)) => value.push(c),
                    }
                }
                TokenKind::Str(value)
            }
            c if is_ident_start(c) => {
                let mut ident = String::new();
                while let Some(&(_, c)) = chars.peek() {
                    if !is_ident_continue(c) {
                        break;
                    }
                    ident.push(c);
                    chars.next();
                }
                TokenKind::Ident(ident)
            }
            other => {
                return Err(ConditionError::new(
                    format!("unexpected character '{other}'"),
                    offset,
                ))
            }
        };
        out.push(Token { kind, offset });
    }
    Ok(out)
}

struct Parser<'t> {
    tokens: &'t [Token],
    pos: usize,
    end: usize,
}

impl<'t> Parser<'t> {
    fn peek(&self) -> Option<&'t Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<&'t Token> {
        let tok = self.tokens.get(self.pos);
        if tok.is_some() {
            self.pos += 1;
        }
        tok
    }

    fn offset(&self) -> usize {
        self.peek().map_or(self.end, |t| t.offset)
    }

    fn expected(&self, what: &str) -> ConditionError {
        match self.peek() {
            Some(tok) => ConditionError::new(
                format!("expected {what}, found {}", tok.kind.describe()),
                tok.offset,
            ),
            None => ConditionError::new(format!("expected {what}, found end of input"), self.end),
        }
    }

    /// Precedence climbing: 0 = `||`, 1 = `&&`.
    fn expr(&mut self, min_prec: u8) -> Result<Condition, ConditionError> {
        let mut lhs = self.unary()?;
        loop {
            let prec = match self.peek().map(|t| &t.kind) {
                Some(TokenKind::OrOr) => 0,
                Some(TokenKind::AndAnd) => 1,
                _ => break,
            };
            if prec < min_prec {
                break;
            }
            self.next();
            let rhs = self.expr(prec + 1)?;
            lhs = if prec == 0 {
                Condition::or(lhs, rhs)
            } else {
                Condition::and(lhs, rhs)
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Condition, ConditionError> {
        match self.peek().map(|t| &t.kind) {
            Some(TokenKind::Bang) => {
                self.next();
                Ok(Condition::not(self.unary()?))
            }
            Some(TokenKind::LParen) => {
                self.next();
                let inner = self.expr(0)?;
                match self.peek().map(|t| &t.kind) {
                    Some(TokenKind::RParen) => {
                        self.next();
                        Ok(inner)
                    }
                    _ => Err(self.expected("')'")),
                }
            }
            _ => self.primitive(),
        }
    }

    fn ident(&mut self) -> Result<String, ConditionError> {
        match self.peek().map(|t| &t.kind) {
            Some(TokenKind::Ident(name)) => {
                self.next();
                Ok(name.clone())
            }
            _ => Err(self.expected("identifier")),
        }
    }

    fn primitive(&mut self) -> Result<Condition, ConditionError> {
        let start = self.offset();
        let Some(tok) = self.next() else {
            return Err(ConditionError::new(
                "expected condition, found end of input",
                self.end,
            ));
        };
        match &tok.kind {
            TokenKind::Hash => Ok(Condition::Intent(self.ident()?)),
            TokenKind::At => {
                let entity = self.ident()?;
                let value = if matches!(self.peek().map(|t| &t.kind), Some(TokenKind::Colon)) {
                    self.next();
                    Some(self.ident()?)
                } else {
                    None
                };
                Ok(Condition::Entity { entity, value })
            }
            TokenKind::Dollar => {
                let variable = self.ident()?;
                let op = match self.peek().map(|t| &t.kind) {
                    Some(TokenKind::EqEq) => CompareOp::Eq,
                    Some(TokenKind::NotEq) => CompareOp::Ne,
                    _ => return Err(self.expected("'==' or '!='")),
                };
                self.next();
                let value = match self.peek().map(|t| &t.kind) {
                    Some(TokenKind::Str(s)) => s.clone(),
                    _ => return Err(self.expected("quoted string")),
                };
                self.next();
                Ok(Condition::Context {
                    variable,
                    op,
                    value,
                })
            }
            TokenKind::Ident(word) => match word.as_str() {
                "welcome" => Ok(Condition::Welcome),
                "anything_else" => Ok(Condition::AnythingElse),
                "true" => Ok(Condition::Bool(true)),
                "false" => Ok(Condition::Bool(false)),
                other => Err(ConditionError::new(
                    format!("unknown keyword '{other}'"),
                    start,
                )),
            },
            other => Err(ConditionError::new(
                format!("expected condition, found {}", other.describe()),
                start,
            )),
        }
    }
}
