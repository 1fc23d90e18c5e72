use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Opaque primary key shared by every stored entity.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct Pk(String);

impl Pk {
    pub fn new(value: impl Into<String>) -> Self {
        Self(value.into())
    }

    /// Random 128-bit identifier rendered as 32 lowercase hex digits.
    pub fn generate() -> Self {
        let bits: u128 = rand::rng().random();
        Self(format!("{bits:032x}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Pk {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Pk {
    fn from(value: &str) -> Self {
        Self(value.to_owned())
    }
}

impl From<String> for Pk {
    fn from(value: String) -> Self {
        Self(value)
    }
}

impl std::borrow::Borrow<str> for Pk {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl AsRef<str> for Pk {
    fn as_ref(&self) -> &str {
        &self.0
    }
}
