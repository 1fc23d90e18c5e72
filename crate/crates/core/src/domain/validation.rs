use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{CharacterProfile, Relationship, RelationshipIndex, Scenario};

/// One broken rule on one field.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl Violation {
    pub fn new(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Self { field: field.into(), rule: rule.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

pub fn validate_character(profile: &CharacterProfile) -> Vec<Violation> {
    let mut out = Vec::new();
    if profile.pk.is_empty() {
        out.push(Violation::new("pk", "non-empty"));
    }
    if profile.age < 0 {
        out.push(Violation::new("age", "non-negative"));
    }
    out
}

pub fn validate_scenario(scenario: &Scenario) -> Vec<Violation> {
    let mut out = Vec::new();
    if scenario.pk.is_empty() {
        out.push(Violation::new("pk", "non-empty"));
    }
    if scenario.agent_goals.is_empty() {
        out.push(Violation::new("agent_goals", "at least one goal"));
    }
    if scenario.constraints.arity < 1 {
        out.push(Violation::new("constraints.arity", "at least 1"));
    }
    if scenario.constraints.arity != scenario.agent_goals.len() {
        out.push(Violation::new("constraints.arity", "equals number of agent goals"));
    }
    if let Some((lo, hi)) = scenario.constraints.age_range {
        if lo > hi {
            out.push(Violation::new("constraints.age_range", "min <= max"));
        }
    }
    out
}

pub fn validate_relationship(edge: &Relationship) -> Vec<Violation> {
    let mut out = Vec::new();
    if edge.pk.is_empty() {
        out.push(Violation::new("pk", "non-empty"));
    }
    if edge.char_a == edge.char_b {
        out.push(Violation::new("char_b", "differs from char_a"));
    }
    out
}

/// Cross-entity rules for a set of documents about to share one store.
pub fn validate_batch(characters: &[CharacterProfile], edges: &[Relationship]) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for c in characters {
        if !seen.insert(&c.pk) {
            out.push(Violation::new("pk", "unique"));
        }
    }
    if RelationshipIndex::duplicate_pair(edges).is_some() {
        out.push(Violation::new("char_a,char_b", "one edge per pair"));
    }
    out
}
