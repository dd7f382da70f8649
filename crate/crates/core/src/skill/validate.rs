use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::Serialize;

use super::{Condition, DialogNode, Skill};
use crate::text::normalize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationCode {
    ConditionSyntax,
    InvalidIdentifier,
    DuplicateIntent,
    EmptyExamples,
    EmptyExample,
    DuplicateExample,
    DuplicateEntity,
    EmptyEntity,
    DuplicateEntityValue,
    EmptySurfaceForm,
    DuplicateSurfaceForm,
    DuplicateNodeId,
    EmptyResponses,
    MissingWelcome,
    MultipleWelcome,
    MissingFallback,
    MisplacedFallback,
    MultipleFallback,
    UndeclaredIntent,
    UndeclaredEntity,
    UndeclaredEntityValue,
    UnreachableNode,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::ConditionSyntax => "condition_syntax",
            ViolationCode::InvalidIdentifier => "invalid_identifier",
            ViolationCode::DuplicateIntent => "duplicate_intent",
            ViolationCode::EmptyExamples => "empty_examples",
            ViolationCode::EmptyExample => "empty_example",
            ViolationCode::DuplicateExample => "duplicate_example",
            ViolationCode::DuplicateEntity => "duplicate_entity",
            ViolationCode::EmptyEntity => "empty_entity",
            ViolationCode::DuplicateEntityValue => "duplicate_entity_value",
            ViolationCode::EmptySurfaceForm => "empty_surface_form",
            ViolationCode::DuplicateSurfaceForm => "duplicate_surface_form",
            ViolationCode::DuplicateNodeId => "duplicate_node_id",
            ViolationCode::EmptyResponses => "empty_responses",
            ViolationCode::MissingWelcome => "missing_welcome",
            ViolationCode::MultipleWelcome => "multiple_welcome",
            ViolationCode::MissingFallback => "missing_fallback",
            ViolationCode::MisplacedFallback => "misplaced_fallback",
            ViolationCode::MultipleFallback => "multiple_fallback",
            ViolationCode::UndeclaredIntent => "undeclared_intent",
            ViolationCode::UndeclaredEntity => "undeclared_entity",
            ViolationCode::UndeclaredEntityValue => "undeclared_entity_value",
            ViolationCode::UnreachableNode => "unreachable_node",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub message: String,
    /// Path into the document, e.g. `dialog[2].children[0]`.
    pub location: String,
}

impl Violation {
    pub(crate) fn new(code: ViolationCode, message: String, location: String) -> Self {
        Self {
            code,
            message,
            location,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {} ({})", self.code, self.message, self.location)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_servable(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, code: ViolationCode) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }

    fn push(&mut self, code: ViolationCode, message: String, location: String) {
        self.violations
            .push(Violation::new(code, message, location));
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return writeln!(f, "ok: no violations");
        }
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Check every structural rule a servable skill must satisfy.
pub fn validate_skill(skill: &Skill) -> ValidationReport {
    let mut report = ValidationReport::default();
    if !is_identifier(&skill.name) {
        report.push(
            ViolationCode::InvalidIdentifier,
            format!("skill name '{}' is not an identifier", skill.name),
            "name".into(),
        );
    }
    check_intents(skill, &mut report);
    check_entities(skill, &mut report);
    check_dialog(skill, &mut report);
    report
}

fn check_intents(skill: &Skill, report: &mut ValidationReport) {
    let mut seen = HashSet::new();
    for (i, intent) in skill.intents.iter().enumerate() {
        let loc = format!("intents[{i}]");
        if !is_identifier(&intent.name) {
            report.push(
                ViolationCode::InvalidIdentifier,
                format!("intent name '{}' is not an identifier", intent.name),
                loc.clone(),
            );
        }
        if !seen.insert(intent.name.as_str()) {
            report.push(
                ViolationCode::DuplicateIntent,
                format!("duplicate intent name '{}'", intent.name),
                loc.clone(),
            );
        }
        if intent.examples.is_empty() {
            report.push(
                ViolationCode::EmptyExamples,
                format!("intent '{}' has no examples", intent.name),
                loc.clone(),
            );
        }
        let mut examples = HashSet::new();
        for (j, example) in intent.examples.iter().enumerate() {
            let norm = normalize(example);
            if norm.is_empty() {
                report.push(
                    ViolationCode::EmptyExample,
                    format!("intent '{}' has an empty example", intent.name),
                    format!("{loc}.examples[{j}]"),
                );
            } else if !examples.insert(norm) {
                report.push(
                    ViolationCode::DuplicateExample,
                    format!("intent '{}' repeats example '{}'", intent.name, example),
                    format!("{loc}.examples[{j}]"),
                );
            }
        }
    }
}

fn check_entities(skill: &Skill, report: &mut ValidationReport) {
    let mut seen = HashSet::new();
    for (i, entity) in skill.entities.iter().enumerate() {
        let loc = format!("entities[{i}]");
        if !is_identifier(&entity.name) {
            report.push(
                ViolationCode::InvalidIdentifier,
                format!("entity name '{}' is not an identifier", entity.name),
                loc.clone(),
            );
        }
        if !seen.insert(entity.name.as_str()) {
            report.push(
                ViolationCode::DuplicateEntity,
                format!("duplicate entity name '{}'", entity.name),
                loc.clone(),
            );
        }
        if entity.values.is_empty() {
            report.push(
                ViolationCode::EmptyEntity,
                format!("entity '{}' has no values", entity.name),
                loc.clone(),
            );
        }
        let mut labels = HashSet::new();
        for (j, value) in entity.values.iter().enumerate() {
            let vloc = format!("{loc}.values[{j}]");
            if !is_identifier(&value.label) {
                report.push(
                    ViolationCode::InvalidIdentifier,
                    format!("entity value '{}' is not an identifier", value.label),
                    vloc.clone(),
                );
            }
            if !labels.insert(value.label.as_str()) {
                report.push(
                    ViolationCode::DuplicateEntityValue,
                    format!("entity '{}' repeats value '{}'", entity.name, value.label),
                    vloc.clone(),
                );
            }
            let mut forms = HashSet::new();
            for form in value.surface_forms() {
                let norm = normalize(form);
                if norm.is_empty() {
                    report.push(
                        ViolationCode::EmptySurfaceForm,
                        format!(
                            "entity value '{}:{}' has an empty synonym",
                            entity.name, value.label
                        ),
                        vloc.clone(),
                    );
                } else if !forms.insert(norm) {
                    report.push(
                        ViolationCode::DuplicateSurfaceForm,
                        format!(
                            "entity value '{}:{}' repeats surface form '{}'",
                            entity.name, value.label, form
                        ),
                        vloc.clone(),
                    );
                }
            }
        }
    }
}

struct DialogCheck<'a> {
    skill: &'a Skill,
    ids: HashSet<&'a str>,
    welcome: Vec<String>,
    fallback: Vec<(String, bool)>,
}

fn check_dialog(skill: &Skill, report: &mut ValidationReport) {
    let mut check = DialogCheck {
        skill,
        ids: HashSet::new(),
        welcome: Vec::new(),
        fallback: Vec::new(),
    };
    check.siblings(&skill.dialog, "dialog", true, report);

    match check.welcome.len() {
        0 => report.push(
            ViolationCode::MissingWelcome,
            "missing welcome node".into(),
            "dialog".into(),
        ),
        1 => {}
        _ => {
            for loc in &check.welcome[1..] {
                report.push(
                    ViolationCode::MultipleWelcome,
                    "more than one welcome node".into(),
                    loc.clone(),
                );
            }
        }
    }
    match check.fallback.len() {
        0 => report.push(
            ViolationCode::MissingFallback,
            "missing fallback: no anything_else node".into(),
            "dialog".into(),
        ),
        n => {
            if n > 1 {
                for (loc, _) in &check.fallback[1..] {
                    report.push(
                        ViolationCode::MultipleFallback,
                        "more than one anything_else node".into(),
                        loc.clone(),
                    );
                }
            }
            let (loc, last_top_level) = &check.fallback[0];
            if !last_top_level {
                report.push(
                    ViolationCode::MisplacedFallback,
                    "anything_else node must be the last top-level node".into(),
                    loc.clone(),
                );
            }
        }
    }
}

impl<'a> DialogCheck<'a> {
    fn siblings(
        &mut self,
        nodes: &'a [DialogNode],
        path: &str,
        top_level: bool,
        report: &mut ValidationReport,
    ) {
        let mut shadowed_by: Option<&str> = None;
        for (i, node) in nodes.iter().enumerate() {
            let loc = if path == "dialog" {
                format!("dialog[{i}]")
            } else {
                format!("{path}.children[{i}]")
            };
            if let Some(prev) = shadowed_by {
                report.push(
                    ViolationCode::UnreachableNode,
                    format!(
                        "node '{}' is unreachable after always-true sibling '{}'",
                        node.id, prev
                    ),
                    loc.clone(),
                );
            }
            self.node(node, &loc, top_level && i + 1 == nodes.len(), report);
            if shadowed_by.is_none()
                && matches!(
                    node.condition,
                    Condition::Bool(true) | Condition::AnythingElse
                )
            {
                shadowed_by = Some(&node.id);
            }
            self.siblings(&node.children, &loc, false, report);
        }
    }

    fn node(
        &mut self,
        node: &'a DialogNode,
        loc: &str,
        last_top_level: bool,
        report: &mut ValidationReport,
    ) {
        if !is_identifier(&node.id) {
            report.push(
                ViolationCode::InvalidIdentifier,
                format!("node id '{}' is not an identifier", node.id),
                loc.into(),
            );
        }
        if !self.ids.insert(&node.id) {
            report.push(
                ViolationCode::DuplicateNodeId,
                format!("duplicate node id '{}'", node.id),
                loc.into(),
            );
        }
        if node.responses.is_empty() && node.children.is_empty() {
            report.push(
                ViolationCode::EmptyResponses,
                format!("node '{}' has no responses and no children", node.id),
                loc.into(),
            );
        }
        for key in node.context_updates.keys() {
            if !is_identifier(key) {
                report.push(
                    ViolationCode::InvalidIdentifier,
                    format!("context variable '{key}' is not an identifier"),
                    loc.into(),
                );
            }
        }
        match node.condition {
            Condition::Welcome => self.welcome.push(loc.into()),
            Condition::AnythingElse => self.fallback.push((loc.into(), last_top_level)),
            _ => {}
        }
        self.references(node, loc, report);
    }

    fn references(&self, node: &DialogNode, loc: &str, report: &mut ValidationReport) {
        let mut reported = BTreeMap::new();
        node.condition.for_each_primitive(&mut |prim| match prim {
            Condition::Intent(name) if self.skill.intent(name).is_none() => {
                reported.insert(
                    format!("i:{name}"),
                    (
                        ViolationCode::UndeclaredIntent,
                        format!("undeclared intent '#{name}' in node '{}'", node.id),
                    ),
                );
            }
            Condition::Entity { entity, value } => match self.skill.entity(entity) {
                None => {
                    reported.insert(
                        format!("e:{entity}"),
                        (
                            ViolationCode::UndeclaredEntity,
                            format!("undeclared entity '@{entity}' in node '{}'", node.id),
                        ),
                    );
                }
                Some(decl) => {
                    if let Some(v) = value {
                        if !decl.values.iter().any(|d| &d.label == v) {
                            reported.insert(
                                format!("v:{entity}:{v}"),
                                (
                                    ViolationCode::UndeclaredEntityValue,
                                    format!(
                                        "undeclared entity value '@{entity}:{v}' in node '{}'",
                                        node.id
                                    ),
                                ),
                            );
                        }
                    }
                }
            },
            _ => {}
        });
        for (_, (code, message)) in reported {
            report.push(code, message, format!("{loc}.condition"));
        }
    }
}
