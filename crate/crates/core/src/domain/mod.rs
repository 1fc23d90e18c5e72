//! Typed data model for scenarios, characters and relationships.

mod character;
mod pk;
mod relationship;
mod scenario;
mod validation;
pub mod visibility;

pub use character::{BigFive, CharacterProfile};
pub use pk::Pk;
pub use relationship::{Relationship, RelationshipIndex, RelationshipType};
pub use scenario::{check_constraints, ArityMismatch, ConstraintReport, ConstraintSet, Scenario};
pub use validation::{validate_batch, validate_character, validate_relationship, validate_scenario, Violation};
pub use visibility::{lattice, visible_fields, ObservableProfile, ProfileField};

pub(crate) fn default_schema_version() -> u32 {
    1
}
