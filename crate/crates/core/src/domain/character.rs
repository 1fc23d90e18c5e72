use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{default_schema_version, Pk};

/// Free-text level for each of the Big Five traits.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BigFive {
    pub openness: String,
    pub conscientiousness: String,
    pub extraversion: String,
    pub agreeableness: String,
    pub neuroticism: String,
}

impl BigFive {
    pub fn is_blank(&self) -> bool {
        self.traits().iter().all(|(_, level)| level.trim().is_empty())
    }

    pub fn traits(&self) -> [(&'static str, &str); 5] {
        [
            ("openness", &self.openness),
            ("conscientiousness", &self.conscientiousness),
            ("extraversion", &self.extraversion),
            ("agreeableness", &self.agreeableness),
            ("neuroticism", &self.neuroticism),
        ]
    }

    /// `openness: high; agreeableness: low`, skipping blank traits.
    pub fn render(&self) -> String {
        self.traits()
            .iter()
            .filter(|(_, level)| !level.trim().is_empty())
            .map(|(name, level)| format!("{name}: {level}"))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

/// A role-playable persona. `secret_info` and `extra_private` are never shown
/// to anyone but the owning agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharacterProfile {
    #[serde(default)]
    pub pk: Pk,
    #[serde(default = "default_schema_version")]
    pub version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gender: Option<String>,
    pub age: i64,
    #[serde(default)]
    pub occupation: String,
    #[serde(default)]
    pub pronouns: String,
    #[serde(default)]
    pub personality: BigFive,
    #[serde(default)]
    pub moral_values: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision_style: Option<String>,
    #[serde(default)]
    pub public_info: String,
    #[serde(default)]
    pub secret_info: String,
    #[serde(default)]
    pub extra_public: BTreeMap<String, String>,
    #[serde(default)]
    pub extra_private: BTreeMap<String, String>,
    /// Keys this version does not know about, kept verbatim.
    #[serde(flatten)]
    pub unknown: BTreeMap<String, Value>,
}

impl CharacterProfile {
    pub fn new(pk: impl Into<Pk>, name: impl Into<String>, age: i64) -> Self {
        Self {
            pk: pk.into(),
            version: default_schema_version(),
            name: name.into(),
            gender: None,
            age,
            occupation: String::new(),
            pronouns: String::new(),
            personality: BigFive::default(),
            moral_values: Vec::new(),
            decision_style: None,
            public_info: String::new(),
            secret_info: String::new(),
            extra_public: BTreeMap::new(),
            extra_private: BTreeMap::new(),
            unknown: BTreeMap::new(),
        }
    }

    /// Every non-empty field as text, secrets included. Only ever shown to the
    /// owner.
    pub fn full_view(&self) -> BTreeMap<String, String> {
        let mut view = BTreeMap::new();
        view.insert("name".to_owned(), self.name.clone());
        if let Some(gender) = &self.gender {
            view.insert("gender".to_owned(), gender.clone());
        }
        view.insert("age".to_owned(), self.age.to_string());
        put_nonempty(&mut view, "occupation", &self.occupation);
        put_nonempty(&mut view, "pronouns", &self.pronouns);
        put_nonempty(&mut view, "personality", &self.personality.render());
        put_nonempty(&mut view, "moral_values", &self.moral_values.join(", "));
        if let Some(style) = &self.decision_style {
            put_nonempty(&mut view, "decision_style", style);
        }
        put_nonempty(&mut view, "public_info", &self.public_info);
        put_nonempty(&mut view, "secret_info", &self.secret_info);
        for (k, v) in &self.extra_public {
            view.insert(format!("extra_public.{k}"), v.clone());
        }
        for (k, v) in &self.extra_private {
            view.insert(format!("extra_private.{k}"), v.clone());
        }
        view
    }
}

fn put_nonempty(view: &mut BTreeMap<String, String>, key: &str, value: &str) {
    if !value.trim().is_empty() {
        view.insert(key.to_owned(), value.to_owned());
    }
}
