pub mod data;
pub mod report;
pub mod serve;
pub mod simulate;
pub mod stress;

use std::sync::Arc;

use anyhow::{Context, Result};
use socsim_core::agents::ModelRegistry;
use socsim_core::engine::EngineContext;
use socsim_core::persistence::Store;

pub async fn open_store(url: Option<&str>) -> Result<Store> {
    let store = match url {
        Some(u) => Store::from_url(u).await,
        None => Store::from_env().await,
    };
    store.context("cannot open store")
}

/// Engine context with an optional judge resolved from the environment.
pub fn engine(store: Store, judge_model: Option<&str>, judge_endpoint: &str) -> Result<EngineContext> {
    let models = Arc::new(ModelRegistry::default());
    let mut ctx = EngineContext::new(store).with_models(Arc::clone(&models));
    if let Some(model) = judge_model {
        let chat = models.resolve(judge_endpoint).context("judge endpoint")?;
        ctx = ctx.with_judge(chat, model);
    }
    Ok(ctx)
}
