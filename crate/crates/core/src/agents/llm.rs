//! Provider-agnostic chat-completions client.
//!
//! Speaks the common `POST {base}/chat/completions` contract. Credentials are
//! read from the environment only: `MODEL_API_KEY` / `MODEL_BASE_URL` for the
//! default endpoint, `MODEL_API_KEY_<NAME>` / `MODEL_BASE_URL_<NAME>` for a
//! named one.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::Semaphore;

use super::parse::parse_action;
use super::policy::{Decision, DecisionContext, LlmSpec, Policy, PolicyError};
use super::prompt::build_prompt;
use crate::broker::ActionKind;
use crate::retry::RetryPolicy;

pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";
pub const DEFAULT_CONCURRENCY: usize = 16;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: "system".into(), content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: "user".into(), content: content.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
pub struct Usage {
    #[serde(default)]
    pub prompt_tokens: u64,
    #[serde(default)]
    pub completion_tokens: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChatReply {
    pub content: String,
    pub usage: Option<Usage>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LlmError {
    #[error("request timed out")]
    Timeout,
    #[error("endpoint returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed response body: {0}")]
    Malformed(String),
    #[error("missing credential: set {0}")]
    MissingCredential(String),
}

#[async_trait]
pub trait ChatModel: Send + Sync {
    async fn complete(&self, request: &ChatRequest) -> Result<ChatReply, LlmError>;
}

/// Token totals across every call made through one registry.
#[derive(Debug, Default)]
pub struct UsageMeter {
    prompt: AtomicU64,
    completion: AtomicU64,
    calls: AtomicU64,
}

impl UsageMeter {
    pub fn record(&self, usage: Option<Usage>) {
        self.calls.fetch_add(1, Ordering::Relaxed);
        if let Some(u) = usage {
            self.prompt.fetch_add(u.prompt_tokens, Ordering::Relaxed);
            self.completion.fetch_add(u.completion_tokens, Ordering::Relaxed);
        }
    }

    /// `(calls, prompt tokens, completion tokens)`
    pub fn totals(&self) -> (u64, u64, u64) {
        (
            self.calls.load(Ordering::Relaxed),
            self.prompt.load(Ordering::Relaxed),
            self.completion.load(Ordering::Relaxed),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EndpointConfig {
    pub base_url: String,
    pub api_key: String,
    pub timeout: Duration,
}

impl EndpointConfig {
    fn env_suffix(name: &str) -> String {
        if name == "default" {
            String::new()
        } else {
            format!("_{}", name.to_ascii_uppercase().replace(['-', '.', ' '], "_"))
        }
    }

    pub fn key_var(name: &str) -> String {
        format!("MODEL_API_KEY{}", Self::env_suffix(name))
    }

    pub fn from_env(name: &str) -> Result<Self, LlmError> {
        let suffix = Self::env_suffix(name);
        let key_var = Self::key_var(name);
        let api_key = std::env::var(&key_var)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or(LlmError::MissingCredential(key_var))?;
        let base_url = std::env::var(format!("MODEL_BASE_URL{suffix}"))
            .ok()
            .filter(|u| !u.is_empty())
            .unwrap_or_else(|| DEFAULT_BASE_URL.to_owned());
        Ok(Self { base_url, api_key, timeout: DEFAULT_TIMEOUT })
    }
}

#[derive(Deserialize)]
struct CompletionBody {
    choices: Vec<CompletionChoice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct CompletionChoice {
    message: CompletionMessage,
}

#[derive(Deserialize)]
struct CompletionMessage {
    #[serde(default)]
    content: Option<String>,
}

/// HTTP client for one endpoint. Calls share a concurrency limit.
pub struct HttpChatModel {
    client: reqwest::Client,
    config: EndpointConfig,
    limiter: Arc<Semaphore>,
}

impl HttpChatModel {
    pub fn new(config: EndpointConfig, limiter: Arc<Semaphore>) -> Self {
        Self { client: reqwest::Client::new(), config, limiter }
    }
}

#[async_trait]
impl ChatModel for HttpChatModel {
    async fn complete(&self, request: &ChatRequest) -> Result<ChatReply, LlmError> {
        let _permit = self.limiter.acquire().await.map_err(|e| LlmError::Transport(e.to_string()))?;
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let response = self
            .client
            .post(url)
            .bearer_auth(&self.config.api_key)
            .timeout(self.config.timeout)
            .json(request)
            .send()
            .await
            .map_err(classify)?;
        let status = response.status();
        let text = response.text().await.map_err(classify)?;
        if !status.is_success() {
            return Err(LlmError::Status { status: status.as_u16(), body: text });
        }
        let body: CompletionBody = serde_json::from_str(&text).map_err(|e| LlmError::Malformed(e.to_string()))?;
        let content = body
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| LlmError::Malformed("no choices[0].message.content".into()))?;
        Ok(ChatReply { content, usage: body.usage })
    }
}

fn classify(e: reqwest::Error) -> LlmError {
    if e.is_timeout() {
        LlmError::Timeout
    } else {
        LlmError::Transport(e.to_string())
    }
}

/// Retries transient failures. Returns the reply and how many retries it took.
pub async fn complete_with_retry(
    model: &dyn ChatModel,
    request: &ChatRequest,
    retry: &RetryPolicy,
) -> Result<(ChatReply, u32), LlmError> {
    let mut retries = 0;
    let reply = retry
        .run(
            |attempt, err: &LlmError| {
                retries = attempt;
                tracing::warn!(model = %request.model, attempt, error = %err, "retrying chat completion");
            },
            || model.complete(request),
        )
        .await?;
    Ok((reply, retries))
}

/// Named endpoints, built from the environment on first use unless
/// registered explicitly.
pub struct ModelRegistry {
    models: Mutex<BTreeMap<String, Arc<dyn ChatModel>>>,
    limiter: Arc<Semaphore>,
    usage: Arc<UsageMeter>,
}

impl Default for ModelRegistry {
    fn default() -> Self {
        Self::new(DEFAULT_CONCURRENCY)
    }
}

impl ModelRegistry {
    pub fn new(max_concurrency: usize) -> Self {
        Self {
            models: Mutex::new(BTreeMap::new()),
            limiter: Arc::new(Semaphore::new(max_concurrency.max(1))),
            usage: Arc::new(UsageMeter::default()),
        }
    }

    pub fn register(&self, endpoint: impl Into<String>, model: Arc<dyn ChatModel>) {
        self.models.lock().expect("registry poisoned").insert(endpoint.into(), model);
    }

    pub fn resolve(&self, endpoint: &str) -> Result<Arc<dyn ChatModel>, LlmError> {
        let mut models = self.models.lock().expect("registry poisoned");
        if let Some(m) = models.get(endpoint) {
            return Ok(Arc::clone(m));
        }
        let model: Arc<dyn ChatModel> =
            Arc::new(HttpChatModel::new(EndpointConfig::from_env(endpoint)?, Arc::clone(&self.limiter)));
        models.insert(endpoint.to_owned(), Arc::clone(&model));
        Ok(model)
    }

    pub fn usage(&self) -> &UsageMeter {
        &self.usage
    }
}

/// Turns observations into a prompt, asks the model, parses the reply.
pub struct LlmPolicy {
    spec: LlmSpec,
    model: Arc<dyn ChatModel>,
    usage: Arc<UsageMeter>,
}

impl LlmPolicy {
    pub fn new(spec: LlmSpec, registry: &ModelRegistry) -> Result<Self, LlmError> {
        let model = registry.resolve(&spec.endpoint)?;
        Ok(Self { spec, model, usage: Arc::clone(&registry.usage) })
    }
}

#[async_trait]
impl Policy for LlmPolicy {
    async fn decide(&mut self, ctx: DecisionContext<'_>) -> Result<Decision, PolicyError> {
        let bundle = build_prompt(ctx.view, ctx.turn);
        let request = ChatRequest {
            model: self.spec.model.clone(),
            messages: bundle.to_messages(),
            temperature: Some(self.spec.temperature),
            max_tokens: Some(self.spec.max_output_tokens),
        };
        let reply = self.model.complete(&request).await?;
        self.usage.record(reply.usage);
        let action = parse_action(&reply.content, &ctx.view.me, &ctx.view.roster)?;
        Ok(match action.kind {
            ActionKind::None => Decision::Wait { wake_after_ms: None },
            _ => Decision::Act(action),
        })
    }
}
