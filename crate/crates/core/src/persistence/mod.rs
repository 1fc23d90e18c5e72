//! Entity storage behind one interface, with an in-memory backend and a
//! Redis-protocol backend.
//!
//! Documents are canonical JSON strings (keys sorted) stored under
//! `<kind>:<pk>`. Listing is a prefix scan with exact-match filtering done
//! client-side.

mod memory;
mod resp;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use async_trait::async_trait;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

pub use memory::MemoryBackend;
pub use resp::{encode_command, read_value, RespBackend, RespConfig, RespValue};

use crate::domain::{
    validate_character, validate_relationship, validate_scenario, CharacterProfile, Pk, Relationship, Scenario,
    Violation,
};
use crate::engine::{EpisodeRecord, SimulationStatus};

pub const STORE_URL_VAR: &str = "STORE_URL";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EntityKind {
    Scenario,
    Character,
    Relationship,
    Episode,
    Status,
}

impl EntityKind {
    pub const ALL: [EntityKind; 5] =
        [EntityKind::Scenario, EntityKind::Character, EntityKind::Relationship, EntityKind::Episode, EntityKind::Status];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Scenario => "scenario",
            EntityKind::Character => "character",
            EntityKind::Relationship => "relationship",
            EntityKind::Episode => "episode",
            EntityKind::Status => "status",
        }
    }

    /// Field holding the document's own pk.
    pub fn pk_field(self) -> &'static str {
        match self {
            EntityKind::Status => "episode_pk",
            _ => "pk",
        }
    }

    /// Fields `list` may filter on. Secret fields are deliberately absent.
    pub fn filterable(self) -> &'static [&'static str] {
        match self {
            EntityKind::Scenario => &["pk", "version", "context", "location", "time"],
            EntityKind::Character => {
                &["pk", "version", "name", "gender", "age", "occupation", "pronouns", "decision_style"]
            }
            EntityKind::Relationship => &["pk", "version", "char_a", "char_b", "kind"],
            EntityKind::Episode => &["pk", "version", "scenario", "mode", "tag", "seed", "prompt_version"],
            EntityKind::Status => &["episode_pk", "status", "progress"],
        }
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntityKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EntityKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown entity kind `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StoreKey {
    pub kind: EntityKind,
    pub pk: Pk,
}

impl StoreKey {
    pub fn new(kind: EntityKind, pk: impl Into<Pk>) -> Self {
        Self { kind, pk: pk.into() }
    }

    pub fn prefix(kind: EntityKind) -> String {
        format!("{kind}:")
    }
}

impl fmt::Display for StoreKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind, self.pk)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StoreError {
    #[error("{kind} `{pk}` not found")]
    NotFound { kind: EntityKind, pk: Pk },
    #[error("store unavailable: {0}")]
    Unavailable(String),
    #[error("validation failed: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Validation(Vec<Violation>),
    #[error("cannot filter {kind} on `{field}`")]
    UnknownFilterField { kind: EntityKind, field: String },
    #[error("stored document under `{key}` is unreadable: {reason}")]
    Corrupt { key: String, reason: String },
}

/// Raw key/value operations a backend must provide. Each call is atomic.
#[async_trait]
pub trait Backend: Send + Sync {
    async fn set(&self, key: &str, value: &str) -> Result<(), StoreError>;
    async fn get(&self, key: &str) -> Result<Option<String>, StoreError>;
    /// Returns whether the key existed.
    async fn del(&self, key: &str) -> Result<bool, StoreError>;
    /// All entries whose key starts with `prefix`, sorted by key.
    async fn scan_prefix(&self, prefix: &str) -> Result<Vec<(String, String)>, StoreError>;
    async fn ping(&self) -> Result<(), StoreError>;
}

/// Exact-match predicates, field name to expected value.
pub type Filter = BTreeMap<String, String>;

/// Validated, typed access to a backend. Cheap to clone and share.
#[derive(Clone)]
pub struct Store {
    backend: Arc<dyn Backend>,
}

impl fmt::Debug for Store {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Store")
    }
}

impl Store {
    pub fn new(backend: Arc<dyn Backend>) -> Self {
        Self { backend }
    }

    pub fn memory() -> Self {
        Self::new(Arc::new(MemoryBackend::new()))
    }

    /// `memory://` or `redis://host:port/db`.
    pub async fn from_url(url: &str) -> Result<Self, StoreError> {
        if url.is_empty() || url.starts_with("memory://") || url == "memory" {
            Ok(Self::memory())
        } else if url.starts_with("redis://") {
            Ok(Self::new(Arc::new(RespBackend::connect(url).await?)))
        } else {
            Err(StoreError::Unavailable(format!("unsupported store url `{url}`")))
        }
    }

    /// Uses `STORE_URL` when set, else an in-memory store.
    pub async fn from_env() -> Result<Self, StoreError> {
        Self::from_url(&std::env::var(STORE_URL_VAR).unwrap_or_default()).await
    }

    pub async fn ping(&self) -> Result<(), StoreError> {
        self.backend.ping().await
    }

    /// Validates and writes, replacing whatever was under the key.
    pub async fn put(&self, kind: EntityKind, pk: &Pk, document: &Value) -> Result<(), StoreError> {
        let violations = validate_document(kind, pk, document);
        if !violations.is_empty() {
            return Err(StoreError::Validation(violations));
        }
        let key = StoreKey::new(kind, pk.clone()).to_string();
        self.backend.set(&key, &canonical_json(document)).await
    }

    pub async fn get(&self, kind: EntityKind, pk: &Pk) -> Result<Value, StoreError> {
        let key = StoreKey::new(kind, pk.clone()).to_string();
        match self.backend.get(&key).await? {
            Some(raw) => parse_stored(&key, &raw),
            None => Err(StoreError::NotFound { kind, pk: pk.clone() }),
        }
    }

    pub async fn exists(&self, kind: EntityKind, pk: &Pk) -> Result<bool, StoreError> {
        let key = StoreKey::new(kind, pk.clone()).to_string();
        Ok(self.backend.get(&key).await?.is_some())
    }

    pub async fn delete(&self, kind: EntityKind, pk: &Pk) -> Result<(), StoreError> {
        let key = StoreKey::new(kind, pk.clone()).to_string();
        if self.backend.del(&key).await? {
            Ok(())
        } else {
            Err(StoreError::NotFound { kind, pk: pk.clone() })
        }
    }

    /// Documents of `kind` matching every predicate, ordered by pk.
    pub async fn list(&self, kind: EntityKind, filter: &Filter) -> Result<Vec<Value>, StoreError> {
        if let Some(field) = filter.keys().find(|f| !kind.filterable().contains(&f.as_str())) {
            return Err(StoreError::UnknownFilterField { kind, field: field.clone() });
        }
        let mut out = Vec::new();
        for (key, raw) in self.backend.scan_prefix(&StoreKey::prefix(kind)).await? {
            let doc = parse_stored(&key, &raw)?;
            if filter.iter().all(|(field, want)| field_matches(&doc, field, want)) {
                out.push((key, doc));
            }
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(out.into_iter().map(|(_, doc)| doc).collect())
    }

    pub async fn put_typed<T: Serialize>(&self, kind: EntityKind, pk: &Pk, value: &T) -> Result<(), StoreError> {
        let doc = serde_json::to_value(value)
            .map_err(|e| StoreError::Validation(vec![Violation::new("document", e.to_string())]))?;
        self.put(kind, pk, &doc).await
    }

    pub async fn get_typed<T: DeserializeOwned>(&self, kind: EntityKind, pk: &Pk) -> Result<T, StoreError> {
        let doc = self.get(kind, pk).await?;
        serde_json::from_value(doc)
            .map_err(|e| StoreError::Corrupt { key: StoreKey::new(kind, pk.clone()).to_string(), reason: e.to_string() })
    }

    pub async fn list_typed<T: DeserializeOwned>(&self, kind: EntityKind, filter: &Filter) -> Result<Vec<T>, StoreError> {
        self.list(kind, filter)
            .await?
            .into_iter()
            .map(|doc| {
                serde_json::from_value(doc)
                    .map_err(|e| StoreError::Corrupt { key: StoreKey::prefix(kind), reason: e.to_string() })
            })
            .collect()
    }

    pub async fn put_character(&self, c: &CharacterProfile) -> Result<(), StoreError> {
        self.put_typed(EntityKind::Character, &c.pk, c).await
    }

    pub async fn put_scenario(&self, s: &Scenario) -> Result<(), StoreError> {
        self.put_typed(EntityKind::Scenario, &s.pk, s).await
    }

    pub async fn put_relationship(&self, r: &Relationship) -> Result<(), StoreError> {
        self.put_typed(EntityKind::Relationship, &r.pk, r).await
    }

    pub async fn put_episode(&self, e: &EpisodeRecord) -> Result<(), StoreError> {
        self.put_typed(EntityKind::Episode, &e.pk, e).await
    }

    pub async fn put_status(&self, s: &SimulationStatus) -> Result<(), StoreError> {
        self.put_typed(EntityKind::Status, &s.episode_pk, s).await
    }

    pub async fn get_character(&self, pk: &Pk) -> Result<CharacterProfile, StoreError> {
        self.get_typed(EntityKind::Character, pk).await
    }

    pub async fn get_scenario(&self, pk: &Pk) -> Result<Scenario, StoreError> {
        self.get_typed(EntityKind::Scenario, pk).await
    }

    pub async fn get_episode(&self, pk: &Pk) -> Result<EpisodeRecord, StoreError> {
        self.get_typed(EntityKind::Episode, pk).await
    }

    pub async fn get_status(&self, pk: &Pk) -> Result<SimulationStatus, StoreError> {
        self.get_typed(EntityKind::Status, pk).await
    }

    pub async fn relationships(&self) -> Result<Vec<Relationship>, StoreError> {
        self.list_typed(EntityKind::Relationship, &Filter::new()).await
    }
}

/// serde_json's default map is a BTreeMap, so serialization sorts keys.
pub fn canonical_json(document: &Value) -> String {
    serde_json::to_string(document).expect("a Value always serializes")
}

fn parse_stored(key: &str, raw: &str) -> Result<Value, StoreError> {
    serde_json::from_str(raw).map_err(|e| StoreError::Corrupt { key: key.to_owned(), reason: e.to_string() })
}

fn field_matches(doc: &Value, field: &str, want: &str) -> bool {
    match doc.get(field) {
        Some(Value::String(s)) => s == want,
        Some(Value::Number(n)) => n.to_string() == want,
        Some(Value::Bool(b)) => b.to_string() == want,
        _ => false,
    }
}

fn typed<T: DeserializeOwned>(document: &Value) -> Result<T, Vec<Violation>> {
    serde_json::from_value(document.clone()).map_err(|e| vec![Violation::new("document", e.to_string())])
}

/// Schema and rule checks for a document about to be stored under `pk`.
pub fn validate_document(kind: EntityKind, pk: &Pk, document: &Value) -> Vec<Violation> {
    if !document.is_object() {
        return vec![Violation::new("document", "must be a JSON object")];
    }
    if pk.is_empty() {
        return vec![Violation::new(kind.pk_field(), "must not be empty")];
    }
    if document.get(kind.pk_field()).and_then(Value::as_str) != Some(pk.as_str()) {
        return vec![Violation::new(kind.pk_field(), "must match the key")];
    }
    let result = match kind {
        EntityKind::Character => typed::<CharacterProfile>(document).map(|c| validate_character(&c)),
        EntityKind::Scenario => typed::<Scenario>(document).map(|s| validate_scenario(&s)),
        EntityKind::Relationship => typed::<Relationship>(document).map(|r| validate_relationship(&r)),
        EntityKind::Episode => typed::<EpisodeRecord>(document).map(|e| match e.check_invariants() {
            Ok(()) => Vec::new(),
            Err(why) => vec![Violation::new("transcript", why)],
        }),
        EntityKind::Status => typed::<SimulationStatus>(document).map(|_| Vec::new()),
    };
    result.unwrap_or_else(|v| v)
}
