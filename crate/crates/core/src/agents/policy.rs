use async_trait::async_trait;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::llm::LlmError;
use super::parse::ParseFailure;
use super::scripted::ScriptSpec;
use crate::broker::{AgentAction, Briefing, Event, Member, Observation};
use crate::domain::{ObservableProfile, Pk};
use std::collections::BTreeMap;

/// How an agent slot is driven.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicySpec {
    Scripted(ScriptSpec),
    Llm(LlmSpec),
}

impl PolicySpec {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            PolicySpec::Scripted(_) => Ok(()),
            PolicySpec::Llm(spec) => spec.validate(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LlmSpec {
    pub model: String,
    /// Named endpoint; credentials come from the environment.
    #[serde(default = "default_endpoint")]
    pub endpoint: String,
    #[serde(default = "default_temperature")]
    pub temperature: f32,
    #[serde(default = "default_max_output_tokens")]
    pub max_output_tokens: u32,
}

impl LlmSpec {
    pub fn new(model: impl Into<String>) -> Self {
        Self {
            model: model.into(),
            endpoint: default_endpoint(),
            temperature: default_temperature(),
            max_output_tokens: default_max_output_tokens(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.model.trim().is_empty() {
            return Err("llm policy needs a model name".into());
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(format!("temperature {} outside [0, 2]", self.temperature));
        }
        Ok(())
    }
}

pub fn default_endpoint() -> String {
    "default".to_owned()
}

fn default_temperature() -> f32 {
    0.7
}

fn default_max_output_tokens() -> u32 {
    512
}

/// Everything one agent has been allowed to observe so far.
#[derive(Clone, Debug, Default)]
pub struct AgentView {
    pub me: Pk,
    pub briefing: Option<Briefing>,
    pub visible_profiles: BTreeMap<Pk, ObservableProfile>,
    pub history: Vec<Event>,
    /// Names usable as direct-message targets.
    pub roster: Vec<Member>,
}

impl AgentView {
    pub fn new(me: Pk, roster: Vec<Member>) -> Self {
        Self { me, roster, ..Self::default() }
    }

    /// Folds observations in and returns the events that were new.
    pub fn absorb(&mut self, observations: Vec<Observation>) -> Vec<Event> {
        let mut fresh = Vec::new();
        for obs in observations {
            if obs.briefing.is_some() {
                self.briefing = obs.briefing;
            }
            self.visible_profiles.extend(obs.visible_profiles);
            fresh.extend(obs.events);
        }
        self.history.extend(fresh.iter().cloned());
        fresh
    }

    /// Drops the oldest events beyond `limit`.
    pub fn trim_history(&mut self, limit: usize) {
        let excess = self.history.len().saturating_sub(limit);
        self.history.drain(..excess);
    }

    pub fn own_actions(&self) -> impl Iterator<Item = &Event> {
        self.history.iter().filter(|e| e.actor == self.me)
    }
}

pub struct DecisionContext<'a> {
    pub turn: u32,
    pub view: &'a AgentView,
    pub fresh: &'a [Event],
    pub rng: &'a mut ChaCha8Rng,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Decision {
    Act(AgentAction),
    /// Stay quiet; optionally look again after a delay even without new input.
    Wait { wake_after_ms: Option<u64> },
}

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Parse(#[from] ParseFailure),
    #[error("scripted failure: {0}")]
    Scripted(String),
}

#[async_trait]
pub trait Policy: Send {
    async fn decide(&mut self, ctx: DecisionContext<'_>) -> Result<Decision, PolicyError>;

    /// How many past events the policy needs kept in its view. `None` keeps all.
    fn history_limit(&self) -> Option<usize> {
        None
    }
}
