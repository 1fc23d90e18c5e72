use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{default_schema_version, Pk};

/// Relationship kinds, declared from least to most close so the derived
/// `Ord` is the closeness order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationshipType {
    Stranger,
    Acquaintance,
    Friend,
    Romantic,
    Family,
}

impl RelationshipType {
    pub const ALL: [RelationshipType; 5] = [
        RelationshipType::Stranger,
        RelationshipType::Acquaintance,
        RelationshipType::Friend,
        RelationshipType::Romantic,
        RelationshipType::Family,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RelationshipType::Stranger => "stranger",
            RelationshipType::Acquaintance => "acquaintance",
            RelationshipType::Friend => "friend",
            RelationshipType::Romantic => "romantic",
            RelationshipType::Family => "family",
        }
    }
}

impl fmt::Display for RelationshipType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RelationshipType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|kind| kind.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown relationship type `{s}`"))
    }
}

/// An undirected, typed edge between two characters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Relationship {
    #[serde(default)]
    pub pk: Pk,
    #[serde(default = "default_schema_version")]
    pub version: u32,
    pub char_a: Pk,
    pub char_b: Pk,
    pub kind: RelationshipType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backstory: Option<String>,
    #[serde(flatten)]
    pub unknown: BTreeMap<String, Value>,
}

impl Relationship {
    pub fn new(pk: impl Into<Pk>, a: impl Into<Pk>, b: impl Into<Pk>, kind: RelationshipType) -> Self {
        Self {
            pk: pk.into(),
            version: default_schema_version(),
            char_a: a.into(),
            char_b: b.into(),
            kind,
            backstory: None,
            unknown: BTreeMap::new(),
        }
    }

    /// Endpoints in canonical (sorted) order.
    pub fn pair(&self) -> (Pk, Pk) {
        unordered(&self.char_a, &self.char_b)
    }

    pub fn connects(&self, x: &Pk, y: &Pk) -> bool {
        self.pair() == unordered(x, y)
    }
}

fn unordered(x: &Pk, y: &Pk) -> (Pk, Pk) {
    if x <= y {
        (x.clone(), y.clone())
    } else {
        (y.clone(), x.clone())
    }
}

/// Lookup of relationship kinds by unordered pair. A pair without an edge is
/// treated as strangers.
#[derive(Clone, Debug, Default)]
pub struct RelationshipIndex {
    edges: BTreeMap<(Pk, Pk), RelationshipType>,
}

impl RelationshipIndex {
    pub fn new<'a>(edges: impl IntoIterator<Item = &'a Relationship>) -> Self {
        let edges = edges.into_iter().map(|r| (r.pair(), r.kind)).collect();
        Self { edges }
    }

    pub fn kind(&self, x: &Pk, y: &Pk) -> RelationshipType {
        self.edges
            .get(&unordered(x, y))
            .copied()
            .unwrap_or(RelationshipType::Stranger)
    }

    /// Returns the first pair that has more than one edge, if any.
    pub fn duplicate_pair<'a>(edges: impl IntoIterator<Item = &'a Relationship>) -> Option<(Pk, Pk)> {
        let mut seen = BTreeSet::new();
        edges.into_iter().map(Relationship::pair).find(|pair| !seen.insert(pair.clone()))
    }
}
