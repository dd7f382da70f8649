//! Declarative skill definitions: intents, entities and the dialog tree.
//!
//! A skill is authored as a single JSON document. [`parse_skill`] reads it,
//! compiles every condition string and runs [`validate_skill`]; only a skill
//! with an empty report is returned.

mod condition;
mod validate;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use condition::{CompareOp, Condition, ConditionError};
pub use validate::{validate_skill, ValidationReport, Violation, ViolationCode};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skill {
    pub name: String,
    pub intents: Vec<Intent>,
    pub entities: Vec<Entity>,
    pub dialog: Vec<DialogNode>,
    pub metadata: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Intent {
    pub name: String,
    pub examples: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entity {
    pub name: String,
    pub values: Vec<EntityValue>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntityValue {
    pub label: String,
    #[serde(default)]
    pub synonyms: Vec<String>,
}

impl EntityValue {
    /// The label followed by its synonyms.
    pub fn surface_forms(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.label.as_str()).chain(self.synonyms.iter().map(String::as_str))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DialogNode {
    pub id: String,
    pub title: String,
    pub condition: Condition,
    pub responses: Vec<String>,
    pub children: Vec<DialogNode>,
    pub context_updates: BTreeMap<String, String>,
    /// Authoring note, carried through serialization and otherwise ignored.
    pub note: Option<String>,
}

#[derive(Debug, Error)]
pub enum SkillError {
    #[error("malformed skill document at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("skill has {} problem(s): {}", .0.len(), summarize(.0))]
    Invalid(Vec<Violation>),
}

fn summarize(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SkillDocument {
    name: String,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
    #[serde(default)]
    intents: Vec<Intent>,
    #[serde(default)]
    entities: Vec<Entity>,
    #[serde(default)]
    dialog: Vec<NodeDocument>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDocument {
    id: String,
    #[serde(default)]
    title: String,
    condition: String,
    #[serde(default)]
    responses: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    children: Vec<NodeDocument>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    context_updates: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    note: Option<String>,
}

/// Parse and compile a skill document, then validate it.
pub fn parse_skill(document: &str) -> Result<Skill, SkillError> {
    let skill = parse_skill_unchecked(document)?;
    let report = validate_skill(&skill);
    if report.is_servable() {
        Ok(skill)
    } else {
        Err(SkillError::Invalid(report.violations))
    }
}

/// Parse and compile conditions without running validation.
pub fn parse_skill_unchecked(document: &str) -> Result<Skill, SkillError> {
    let doc: SkillDocument = serde_json::from_str(document).map_err(|e| SkillError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut errors = Vec::new();
    let dialog = doc
        .dialog
        .into_iter()
        .enumerate()
        .map(|(i, node)| compile_node(node, format!("dialog[{i}]"), &mut errors))
        .collect();
    if !errors.is_empty() {
        return Err(SkillError::Invalid(errors));
    }
    Ok(Skill {
        name: doc.name,
        intents: doc.intents,
        entities: doc.entities,
        dialog,
        metadata: doc.metadata,
    })
}

fn compile_node(node: NodeDocument, path: String, errors: &mut Vec<Violation>) -> DialogNode {
    let condition = match Condition::parse(&node.condition) {
        Ok(c) => c,
        Err(e) => {
            errors.push(Violation::new(
                ViolationCode::ConditionSyntax,
                format!(
                    "bad condition in node '{}': {} in `{}`",
                    node.id, e, node.condition
                ),
                format!("{path}.condition@{}", e.offset),
            ));
            Condition::Bool(false)
        }
    };
    let children = node
        .children
        .into_iter()
        .enumerate()
        .map(|(i, child)| compile_node(child, format!("{path}.children[{i}]"), errors))
        .collect();
    DialogNode {
        id: node.id,
        title: node.title,
        condition,
        responses: node.responses,
        children,
        context_updates: node.context_updates,
        note: node.note,
    }
}

fn node_document(node: &DialogNode) -> NodeDocument {
    NodeDocument {
        id: node.id.clone(),
        title: node.title.clone(),
        condition: node.condition.to_string(),
        responses: node.responses.clone(),
        children: node.children.iter().map(node_document).collect(),
        context_updates: node.context_updates.clone(),
        note: node.note.clone(),
    }
}

/// Serialize back to the document format. Conditions are written in
/// canonical form.
pub fn serialize_skill(skill: &Skill) -> String {
    let doc = SkillDocument {
        name: skill.name.clone(),
        metadata: skill.metadata.clone(),
        intents: skill.intents.clone(),
        entities: skill.entities.clone(),
        dialog: skill.dialog.iter().map(node_document).collect(),
    };
    serde_json::to_string_pretty(&doc).expect("skill documents always serialize")
}

impl Skill {
    pub fn intent(&self, name: &str) -> Option<&Intent> {
        self.intents.iter().find(|i| i.name == name)
    }

    pub fn entity(&self, name: &str) -> Option<&Entity> {
        self.entities.iter().find(|e| e.name == name)
    }

    /// Depth-first search for a node by id.
    pub fn node(&self, id: &str) -> Option<&DialogNode> {
        fn find<'a>(nodes: &'a [DialogNode], id: &str) -> Option<&'a DialogNode> {
            nodes.iter().find_map(|n| {
                if n.id == id {
                    Some(n)
                } else {
                    find(&n.children, id)
                }
            })
        }
        find(&self.dialog, id)
    }

    /// Ids of the nodes from the top level down to `id`, inclusive.
    pub fn node_path(&self, id: &str) -> Option<Vec<String>> {
        fn walk(nodes: &[DialogNode], id: &str, trail: &mut Vec<String>) -> bool {
            for n in nodes {
                trail.push(n.id.clone());
                if n.id == id || walk(&n.children, id, trail) {
                    return true;
                }
                trail.pop();
            }
            false
        }
        let mut trail = Vec::new();
        walk(&self.dialog, id, &mut trail).then_some(trail)
    }

    /// Every node, pre-order.
    pub fn nodes(&self) -> Vec<&DialogNode> {
        fn collect<'a>(nodes: &'a [DialogNode], out: &mut Vec<&'a DialogNode>) {
            for n in nodes {
                out.push(n);
                collect(&n.children, out);
            }
        }
        let mut out = Vec::new();
        collect(&self.dialog, &mut out);
        out
    }

    /// Every response string in the tree, in pre-order.
    pub fn responses(&self) -> Vec<&str> {
        self.nodes()
            .into_iter()
            .flat_map(|n| n.responses.iter().map(String::as_str))
            .collect()
    }
}

/// The exam-stress skill shipped with the crate.
pub const EXAM_STRESS_SKILL: &str = include_str!("../../assets/exam_stress.skill.json");
