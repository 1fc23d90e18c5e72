use std::collections::BTreeMap;
use std::sync::RwLock;

use async_trait::async_trait;

use super::{Backend, StoreError};

/// Process-local backend; the default for tests and single-process runs.
#[derive(Debug, Default)]
pub struct MemoryBackend {
    entries: RwLock<BTreeMap<String, String>>,
}

impl MemoryBackend {
    pub fn new() -> Self {
        Self::default()
    }
}

#[async_trait]
impl Backend for MemoryBackend {
    async fn set(&self, key: &str, value: &str) -> Result<(), StoreError> {
        self.entries.write().expect("store poisoned").insert(key.to_owned(), value.to_owned());
        Ok(())
    }

    async fn get(&self, key: &str) -> Result<Option<String>, StoreError> {
        Ok(self.entries.read().expect("store poisoned").get(key).cloned())
    }

    async fn del(&self, key: &str) -> Result<bool, StoreError> {
        Ok(self.entries.write().expect("store poisoned").remove(key).is_some())
    }

    async fn scan_prefix(&self, prefix: &str) -> Result<Vec<(String, String)>, StoreError> {
        let entries = self.entries.read().expect("store poisoned");
        Ok(entries
            .range(prefix.to_owned()..)
            .take_while(|(k, _)| k.starts_with(prefix))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect())
    }

    async fn ping(&self) -> Result<(), StoreError> {
        Ok(())
    }
}
