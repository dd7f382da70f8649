//! Dialog tree traversal.
//!
//! Each turn scans the children of the focused node first, then the
//! top-level nodes, and fires the first node whose condition holds. A node
//! without responses only routes: it fires through its first matching child
//! within the same turn, or is skipped when no child matches.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nlu::{EntityMatch, IntentMatch};
use crate::skill::{CompareOp, Condition, DialogNode, Skill};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TurnEvidence {
    pub intents: Vec<IntentMatch>,
    pub entities: Vec<EntityMatch>,
    pub context: BTreeMap<String, String>,
    pub is_first_turn: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogTurn {
    pub fired_node: String,
    pub response: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionContext {
    pub variables: BTreeMap<String, String>,
    /// Node whose children are in focus for the next turn.
    pub position: Option<String>,
    pub counters: BTreeMap<String, u64>,
    pub transcript: Vec<DialogTurn>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogOutcome {
    pub fired_node: String,
    pub node_path: Vec<String>,
    pub response: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DialogError {
    #[error("no dialog node matched; the skill has no usable anything_else node")]
    NoNodeFired,
}

pub fn evaluate_condition(condition: &Condition, evidence: &TurnEvidence) -> bool {
    match condition {
        Condition::Intent(name) => evidence
            .intents
            .first()
            .is_some_and(|top| &top.intent == name),
        Condition::Entity { entity, value } => evidence
            .entities
            .iter()
            .any(|m| &m.entity == entity && value.as_ref().is_none_or(|v| &m.value == v)),
        Condition::Context {
            variable,
            op,
            value,
        } => {
            let current = evidence.context.get(variable).map_or("", String::as_str);
            match op {
                CompareOp::Eq => current == value,
                CompareOp::Ne => current != value,
            }
        }
        Condition::Welcome => evidence.is_first_turn,
        Condition::AnythingElse => true,
        Condition::Bool(b) => *b,
        Condition::And(a, b) => evaluate_condition(a, evidence) && evaluate_condition(b, evidence),
        Condition::Or(a, b) => evaluate_condition(a, evidence) || evaluate_condition(b, evidence),
        Condition::Not(a) => !evaluate_condition(a, evidence),
    }
}

/// First node in `nodes` that fires, following routing-only nodes down.
pub(crate) fn first_match<'s>(
    nodes: &'s [DialogNode],
    evidence: &TurnEvidence,
) -> Option<&'s DialogNode> {
    nodes.iter().find_map(|node| {
        if !evaluate_condition(&node.condition, evidence) {
            return None;
        }
        if node.responses.is_empty() {
            first_match(&node.children, evidence)
        } else {
            Some(node)
        }
    })
}

/// Replace `$name` with the variable's value, or nothing when unset.
pub fn interpolate(template: &str, variables: &BTreeMap<String, String>) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(idx) = rest.find('$') {
        out.push_str(&rest[..idx]);
        let after = &rest[idx + 1..];
        let name_len = after
            .char_indices()
            .find(|&(i, c)| {
                !(c.is_ascii_alphanumeric() || c == '_') || (i == 0 && c.is_ascii_digit())
            })
            .map_or(after.len(), |(i, _)| i);
        if name_len == 0 {
            out.push('$');
        } else if let Some(v) = variables.get(&after[..name_len]) {
            out.push_str(v);
        }
        rest = &after[name_len..];
    }
    out.push_str(rest);
    out
}

/// Fire one node for this turn and update the session.
pub fn step_dialog(
    skill: &Skill,
    session: &mut SessionContext,
    evidence: &TurnEvidence,
) -> Result<DialogOutcome, DialogError> {
    let focused = session
        .position
        .as_deref()
        .and_then(|id| skill.node(id))
        .and_then(|node| first_match(&node.children, evidence));
    let fired = focused
        .or_else(|| first_match(&skill.dialog, evidence))
        .ok_or(DialogError::NoNodeFired)?;

    let counter = session.counters.entry(fired.id.clone()).or_insert(0);
    let template = &fired.responses[(*counter % fired.responses.len() as u64) as usize];
    *counter += 1;

    for (k, v) in &fired.context_updates {
        session.variables.insert(k.clone(), v.clone());
    }
    let response = interpolate(template, &session.variables);

    session.position = (!fired.children.is_empty()).then(|| fired.id.clone());
    session.transcript.push(DialogTurn {
        fired_node: fired.id.clone(),
        response: response.clone(),
    });
    Ok(DialogOutcome {
        fired_node: fired.id.clone(),
        node_path: skill.node_path(&fired.id).unwrap_or_default(),
        response,
    })
}
