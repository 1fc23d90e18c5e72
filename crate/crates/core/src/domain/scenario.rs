use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::{default_schema_version, CharacterProfile, Pk, RelationshipIndex, RelationshipType};

/// Which casts a scenario accepts.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintSet {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub required_relationship: Option<RelationshipType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age_range: Option<(i64, i64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occupation_filter: Option<Vec<String>>,
    /// Number of agent slots.
    pub arity: usize,
}

/// Shared setting plus one private goal per agent slot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub pk: Pk,
    #[serde(default = "default_schema_version")]
    pub version: u32,
    pub context: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<String>,
    pub agent_goals: Vec<String>,
    pub constraints: ConstraintSet,
    #[serde(default)]
    pub extra_shared: BTreeMap<String, String>,
    #[serde(flatten)]
    pub unknown: BTreeMap<String, Value>,
}

impl Scenario {
    pub fn new(pk: impl Into<Pk>, context: impl Into<String>, agent_goals: Vec<String>) -> Self {
        let arity = agent_goals.len();
        Self {
            pk: pk.into(),
            version: default_schema_version(),
            context: context.into(),
            location: None,
            time: None,
            agent_goals,
            constraints: ConstraintSet { arity, ..ConstraintSet::default() },
            extra_shared: BTreeMap::new(),
            unknown: BTreeMap::new(),
        }
    }

    pub fn arity(&self) -> usize {
        self.constraints.arity
    }

    /// Context, location, time and shared extras as one block of text.
    pub fn shared_text(&self) -> String {
        let mut out = self.context.clone();
        if let Some(location) = &self.location {
            out.push_str(&format!("\nLocation: {location}"));
        }
        if let Some(time) = &self.time {
            out.push_str(&format!("\nTime: {time}"));
        }
        for (k, v) in &self.extra_shared {
            out.push_str(&format!("\n{k}: {v}"));
        }
        out
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("scenario expects {expected} characters, cast has {actual}")]
pub struct ArityMismatch {
    pub expected: usize,
    pub actual: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstraintReport {
    pub satisfied: bool,
    pub reasons: Vec<String>,
}

/// Checks a cast against the scenario's constraints. Missing edges count as
/// strangers.
pub fn check_constraints(
    scenario: &Scenario,
    cast: &[CharacterProfile],
    edges: &RelationshipIndex,
) -> Result<ConstraintReport, ArityMismatch> {
    let constraints = &scenario.constraints;
    if cast.len() != constraints.arity {
        return Err(ArityMismatch { expected: constraints.arity, actual: cast.len() });
    }
    let mut reasons = Vec::new();

    if let Some(required) = constraints.required_relationship {
        for (i, a) in cast.iter().enumerate() {
            for b in &cast[i + 1..] {
                let kind = edges.kind(&a.pk, &b.pk);
                if kind != required {
                    reasons.push(format!(
                        "{} and {} are {kind}, scenario requires {required}",
                        a.name, b.name
                    ));
                }
            }
        }
    }
    if let Some((lo, hi)) = constraints.age_range {
        for c in cast.iter().filter(|c| c.age < lo || c.age > hi) {
            reasons.push(format!("{} is {}, outside age range [{lo}, {hi}]", c.name, c.age));
        }
    }
    if let Some(allowed) = &constraints.occupation_filter {
        for c in cast.iter().filter(|c| !allowed.contains(&c.occupation)) {
            reasons.push(format!("{} has occupation `{}`, not in the allowed list", c.name, c.occupation));
        }
    }
    Ok(ConstraintReport { satisfied: reasons.is_empty(), reasons })
}
