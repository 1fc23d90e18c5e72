//! Relationship-driven profile visibility.
//!
//! Each relationship kind unlocks a fixed set of profile fields. The sets grow
//! with closeness: strangers see nothing, family sees everything except the
//! private fields.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{CharacterProfile, Pk, RelationshipType};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ProfileField {
    Name,
    Gender,
    Pronouns,
    Age,
    Occupation,
    PublicInfo,
    ExtraPublic,
    Personality,
    MoralValues,
    DecisionStyle,
    SecretInfo,
    ExtraPrivate,
}

impl ProfileField {
    pub const ALL: [ProfileField; 12] = [
        ProfileField::Name,
        ProfileField::Gender,
        ProfileField::Pronouns,
        ProfileField::Age,
        ProfileField::Occupation,
        ProfileField::PublicInfo,
        ProfileField::ExtraPublic,
        ProfileField::Personality,
        ProfileField::MoralValues,
        ProfileField::DecisionStyle,
        ProfileField::SecretInfo,
        ProfileField::ExtraPrivate,
    ];

    pub fn is_private(self) -> bool {
        matches!(self, ProfileField::SecretInfo | ProfileField::ExtraPrivate)
    }

    /// The field a rendered profile key came from.
    pub fn of_key(key: &str) -> Option<ProfileField> {
        Some(match key {
            "name" => ProfileField::Name,
            "gender" => ProfileField::Gender,
            "pronouns" => ProfileField::Pronouns,
            "age" => ProfileField::Age,
            "occupation" => ProfileField::Occupation,
            "public_info" => ProfileField::PublicInfo,
            "personality" => ProfileField::Personality,
            "moral_values" => ProfileField::MoralValues,
            "decision_style" => ProfileField::DecisionStyle,
            "secret_info" => ProfileField::SecretInfo,
            k if k.starts_with("extra_public.") => ProfileField::ExtraPublic,
            k if k.starts_with("extra_private.") => ProfileField::ExtraPrivate,
            _ => return None,
        })
    }
}

const ACQUAINTANCE: &[ProfileField] = &[
    ProfileField::Name,
    ProfileField::Gender,
    ProfileField::Pronouns,
    ProfileField::Age,
    ProfileField::Occupation,
];

const FRIEND: &[ProfileField] = &[
    ProfileField::Name,
    ProfileField::Gender,
    ProfileField::Pronouns,
    ProfileField::Age,
    ProfileField::Occupation,
    ProfileField::PublicInfo,
    ProfileField::ExtraPublic,
];

const ROMANTIC: &[ProfileField] = &[
    ProfileField::Name,
    ProfileField::Gender,
    ProfileField::Pronouns,
    ProfileField::Age,
    ProfileField::Occupation,
    ProfileField::PublicInfo,
    ProfileField::ExtraPublic,
    ProfileField::Personality,
    ProfileField::MoralValues,
    ProfileField::DecisionStyle,
];

/// Fields a viewer may see of someone they relate to by `kind`.
pub fn lattice(kind: RelationshipType) -> &'static [ProfileField] {
    match kind {
        RelationshipType::Stranger => &[],
        RelationshipType::Acquaintance => ACQUAINTANCE,
        RelationshipType::Friend => FRIEND,
        RelationshipType::Romantic | RelationshipType::Family => ROMANTIC,
    }
}

/// What one agent may know about another, as rendered key/value text.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObservableProfile(BTreeMap<String, String>);

impl ObservableProfile {
    pub fn fields(&self) -> &BTreeMap<String, String> {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }
}

/// Projects `target` through the visibility lattice. Self-views are the
/// caller's business; the viewer argument only documents intent.
pub fn visible_fields(_viewer: &Pk, target: &CharacterProfile, kind: RelationshipType) -> ObservableProfile {
    let allowed = lattice(kind);
    let view = target
        .full_view()
        .into_iter()
        .filter(|(key, _)| ProfileField::of_key(key).is_some_and(|f| allowed.contains(&f)))
        .collect();
    ObservableProfile(view)
}
