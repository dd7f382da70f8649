//! Reference implementations used as test oracles.

use std::collections::BTreeMap;

use moodbot::dialog::TurnEvidence;
use moodbot::skill::{CompareOp, Condition, DialogNode, Skill};

/// Condition tree in the oracle's own representation.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Intent(String),
    Entity(String, Option<String>),
    Ctx(String, bool, String),
    Welcome,
    Else,
    Lit(bool),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
}

impl Expr {
    pub fn from_condition(c: &Condition) -> Expr {
        match c {
            Condition::Intent(n) => Expr::Intent(n.clone()),
            Condition::Entity { entity, value } => Expr::Entity(entity.clone(), value.clone()),
            Condition::Context {
                variable,
                op,
                value,
            } => Expr::Ctx(variable.clone(), *op == CompareOp::Eq, value.clone()),
            Condition::Welcome => Expr::Welcome,
            Condition::AnythingElse => Expr::Else,
            Condition::Bool(b) => Expr::Lit(*b),
            Condition::And(a, b) => Expr::And(
                Box::new(Expr::from_condition(a)),
                Box::new(Expr::from_condition(b)),
            ),
            Condition::Or(a, b) => Expr::Or(
                Box::new(Expr::from_condition(a)),
                Box::new(Expr::from_condition(b)),
            ),
            Condition::Not(a) => Expr::Not(Box::new(Expr::from_condition(a))),
        }
    }

    pub fn to_condition(&self) -> Condition {
        match self {
            Expr::Intent(n) => Condition::Intent(n.clone()),
            Expr::Entity(e, v) => Condition::Entity {
                entity: e.clone(),
                value: v.clone(),
            },
            Expr::Ctx(var, eq, v) => Condition::Context {
                variable: var.clone(),
                op: if *eq { CompareOp::Eq } else { CompareOp::Ne },
                value: v.clone(),
            },
            Expr::Welcome => Condition::Welcome,
            Expr::Else => Condition::AnythingElse,
            Expr::Lit(b) => Condition::Bool(*b),
            Expr::And(a, b) => {
                Condition::And(Box::new(a.to_condition()), Box::new(b.to_condition()))
            }
            Expr::Or(a, b) => Condition::Or(Box::new(a.to_condition()), Box::new(b.to_condition())),
            Expr::Not(a) => Condition::Not(Box::new(a.to_condition())),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Or(..) => 0,
            Expr::And(..) => 1,
            _ => 2,
        }
    }
}

/// Character-level recursive-descent parser for the condition grammar.
pub fn parse_condition(src: &str) -> Option<Expr> {
    let mut p = Cursor {
        s: src.chars().collect(),
        i: 0,
    };
    let e = p.or()?;
    p.ws();
    (p.i == p.s.len()).then_some(e)
}

struct Cursor {
    s: Vec<char>,
    i: usize,
}

impl Cursor {
    fn ws(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_whitespace() {
            self.i += 1;
        }
    }

    fn at(&mut self, lit: &str) -> bool {
        self.ws();
        let lit: Vec<char> = lit.chars().collect();
        self.s[self.i..].starts_with(&lit)
    }

    fn eat(&mut self, lit: &str) -> bool {
        if self.at(lit) {
            self.i += lit.chars().count();
            true
        } else {
            false
        }
    }

    fn or(&mut self) -> Option<Expr> {
        let mut lhs = self.and()?;
        while self.eat("||") {
            let rhs = self.and()?;
            lhs = Expr::Or(Box::new(lhs), Box::new(rhs));
        }
        Some(lhs)
    }

    fn and(&mut self) -> Option<Expr> {
        let mut lhs = self.unary()?;
        while self.eat("&&") {
            let rhs = self.unary()?;
            lhs = Expr::And(Box::new(lhs), Box::new(rhs));
        }
        Some(lhs)
    }

    fn unary(&mut self) -> Option<Expr> {
        if self.at("!=") {
            return None;
        }
        if self.eat("!") {
            return Some(Expr::Not(Box::new(self.unary()?)));
        }
        if self.eat("(") {
            let e = self.or()?;
            return self.eat(")").then_some(e);
        }
        self.primary()
    }

    fn ident(&mut self) -> Option<String> {
        self.ws();
        let first = *self.s.get(self.i)?;
        if !(first.is_ascii_alphabetic() || first == '_') {
            return None;
        }
        let start = self.i;
        while self
            .s
            .get(self.i)
            .is_some_and(|c| c.is_ascii_alphanumeric() || *c == '_')
        {
            self.i += 1;
        }
        Some(self.s[start..self.i].iter().collect())
    }

    fn string(&mut self) -> Option<String> {
        if !self.eat("\"") {
            return None;
        }
        let mut out = String::new();
        loop {
            let c = *self.s.get(self.i)?;
            self.i += 1;
            match c {
                '"' => return Some(out),
                '\\' => {
                    let e = *self.s.get(self.i)?;
                    if e != '"' && e != '\\' {
                        return None;
                    }
                    self.i += 1;
                    out.push(e);
                }
                c => out.push(c),
            }
        }
    }

    fn primary(&mut self) -> Option<Expr> {
        if self.eat("#") {
            return Some(Expr::Intent(self.ident()?));
        }
        if self.eat("@") {
            let entity = self.ident()?;
            let value = if self.eat(":") {
                Some(self.ident()?)
            } else {
                None
            };
            return Some(Expr::Entity(entity, value));
        }
        if self.eat("$") {
            let var = self.ident()?;
            let eq = if self.eat("==") {
                true
            } else if self.eat("!=") {
                false
            } else {
                return None;
            };
            return Some(Expr::Ctx(var, eq, self.string()?));
        }
        match self.ident()?.as_str() {
            "welcome" => Some(Expr::Welcome),
            "anything_else" => Some(Expr::Else),
            "true" => Some(Expr::Lit(true)),
            "false" => Some(Expr::Lit(false)),
            _ => None,
        }
    }
}

/// Print `e` with the parentheses it needs, plus optional redundant
/// parentheses and whitespace chosen by `noise`.
pub fn render(e: &Expr, noise: &[u8]) -> String {
    let mut bytes = noise.iter().copied().cycle();
    let mut out = String::new();
    write_expr(e, 0, &mut bytes, &mut out);
    out
}

fn space(noise: &mut impl Iterator<Item = u8>, out: &mut String) {
    match noise.next().unwrap_or(0) % 6 {
        0 | 1 => {}
        2 | 3 => out.push(' '),
        4 => out.push_str("\t "),
        _ => out.push_str("\n  "),
    }
}

fn quote(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

fn write_expr(e: &Expr, min: u8, noise: &mut impl Iterator<Item = u8>, out: &mut String) {
    let redundant = noise.next().unwrap_or(1).is_multiple_of(7);
    let paren = e.precedence() < min || redundant;
    if paren {
        out.push('(');
        space(noise, out);
    }
    match e {
        Expr::Or(a, b) => {
            write_expr(a, 0, noise, out);
            space(noise, out);
            out.push_str("||");
            space(noise, out);
            write_expr(b, 1, noise, out);
        }
        Expr::And(a, b) => {
            write_expr(a, 1, noise, out);
            space(noise, out);
            out.push_str("&&");
            space(noise, out);
            write_expr(b, 2, noise, out);
        }
        Expr::Not(a) => {
            out.push('!');
            space(noise, out);
            write_expr(a, 2, noise, out);
        }
        Expr::Intent(n) => {
            out.push('#');
            space(noise, out);
            out.push_str(n);
        }
        Expr::Entity(name, value) => {
            out.push('@');
            space(noise, out);
            out.push_str(name);
            if let Some(v) = value {
                space(noise, out);
                out.push(':');
                space(noise, out);
                out.push_str(v);
            }
        }
        Expr::Ctx(var, eq, value) => {
            out.push('$');
            space(noise, out);
            out.push_str(var);
            space(noise, out);
            out.push_str(if *eq { "==" } else { "!=" });
            space(noise, out);
            out.push_str(&quote(value));
        }
        Expr::Welcome => out.push_str("welcome"),
        Expr::Else => out.push_str("anything_else"),
        Expr::Lit(b) => out.push_str(if *b { "true" } else { "false" }),
    }
    if paren {
        space(noise, out);
        out.push(')');
    }
}

/// Truth of `e` under the evidence, evaluated on the oracle tree.
pub fn holds(e: &Expr, ev: &TurnEvidence) -> bool {
    match e {
        Expr::Intent(n) => ev.intents.first().is_some_and(|m| &m.intent == n),
        Expr::Entity(name, value) => ev.entities.iter().any(|m| {
            &m.entity == name
                && match value {
                    Some(v) => &m.value == v,
                    None => true,
                }
        }),
        Expr::Ctx(var, eq, value) => {
            let current = ev.context.get(var).cloned().unwrap_or_default();
            (current == *value) == *eq
        }
        Expr::Welcome => ev.is_first_turn,
        Expr::Else => true,
        Expr::Lit(b) => *b,
        Expr::And(a, b) => holds(a, ev) && holds(b, ev),
        Expr::Or(a, b) => holds(a, ev) || holds(b, ev),
        Expr::Not(a) => !holds(a, ev),
    }
}

fn scan<'s>(nodes: &'s [DialogNode], ev: &TurnEvidence) -> Option<&'s DialogNode> {
    for node in nodes {
        if !holds(&Expr::from_condition(&node.condition), ev) {
            continue;
        }
        if !node.responses.is_empty() {
            return Some(node);
        }
        if let Some(found) = scan(&node.children, ev) {
            return Some(found);
        }
    }
    None
}

/// Node the dialog should fire: focused children first, then the top level.
pub fn expected_fire<'s>(
    skill: &'s Skill,
    position: Option<&str>,
    ev: &TurnEvidence,
) -> Option<&'s DialogNode> {
    let focused = position
        .and_then(|id| find(&skill.dialog, id))
        .and_then(|node| scan(&node.children, ev));
    focused.or_else(|| scan(&skill.dialog, ev))
}

pub fn find<'s>(nodes: &'s [DialogNode], id: &str) -> Option<&'s DialogNode> {
    nodes.iter().find_map(|n| {
        if n.id == id {
            Some(n)
        } else {
            find(&n.children, id)
        }
    })
}

/// Probabilistic-OR of independent weights.
pub fn noisy_or(weights: &[f64]) -> f64 {
    1.0 - weights.iter().fold(1.0, |acc, w| acc * (1.0 - w))
}

/// The dominance rule restated: count emotions at or above the threshold.
pub fn expected_dominance(scores: &BTreeMap<&'static str, f64>, threshold: f64) -> String {
    const ORDER: [&str; 5] = ["anger", "fear", "sadness", "joy", "disgust"];
    let qualified: Vec<(&str, f64)> = ORDER
        .iter()
        .filter_map(|c| {
            let s = scores.get(c).copied().unwrap_or(0.0);
            (s >= threshold).then_some((*c, s))
        })
        .collect();
    match qualified.len() {
        0 => "none".to_string(),
        1 | 2 => {
            let mut best = qualified[0];
            for q in &qualified[1..] {
                if q.1 > best.1 {
                    best = *q;
                }
            }
            best.0.to_string()
        }
        _ => "ambiguous".to_string(),
    }
}
