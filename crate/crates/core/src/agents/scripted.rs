//! Deterministic policies for tests, fixtures and stress runs.

use async_trait::async_trait;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::policy::{Decision, DecisionContext, Policy, PolicyError};
use crate::broker::{ActionKind, AgentAction};
use crate::domain::Pk;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScriptLine {
    #[serde(default = "speak")]
    pub kind: ActionKind,
    #[serde(default)]
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<Pk>,
}

fn speak() -> ActionKind {
    ActionKind::Speak
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "script", rename_all = "snake_case")]
pub enum ScriptSpec {
    /// Speaks every turn.
    AlwaysSpeak {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        text: Option<String>,
    },
    /// Speaks until `turn`, then leaves.
    LeaveAtTurn { turn: u32 },
    /// Repeats the latest thing someone else said.
    Echo,
    Silent,
    SpeakOnce {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        text: Option<String>,
    },
    /// Plays the lines in order, one per turn, then leaves.
    Lines { lines: Vec<ScriptLine> },
    /// Group-chat filler: on every wake-up, speaks with `reply_probability`.
    Chatter {
        #[serde(default = "default_reply_probability")]
        reply_probability: f64,
        #[serde(default = "default_idle_ms")]
        idle_ms: u64,
    },
    /// Fails the first `failures` decisions, then speaks every turn.
    Failing { failures: u32 },
}

fn default_reply_probability() -> f64 {
    0.05
}

fn default_idle_ms() -> u64 {
    1_000
}

pub struct ScriptedPolicy {
    me: Pk,
    script: ScriptSpec,
    calls: u32,
}

impl ScriptedPolicy {
    pub fn new(me: Pk, script: ScriptSpec) -> Self {
        Self { me, script, calls: 0 }
    }

    fn act(&self, kind: ActionKind, content: impl Into<String>) -> Decision {
        Decision::Act(AgentAction::new(self.me.clone(), kind, content))
    }
}

#[async_trait]
impl Policy for ScriptedPolicy {
    async fn decide(&mut self, ctx: DecisionContext<'_>) -> Result<Decision, PolicyError> {
        self.calls += 1;
        let turn = ctx.turn;
        let spoken = ctx.view.own_actions().count();
        let quiet = Decision::Wait { wake_after_ms: None };
        let decision = match &self.script {
            ScriptSpec::AlwaysSpeak { text } => {
                self.act(ActionKind::Speak, text.clone().unwrap_or_else(|| format!("turn {turn}")))
            }
            ScriptSpec::LeaveAtTurn { turn: at } if turn >= *at => self.act(ActionKind::Leave, ""),
            ScriptSpec::LeaveAtTurn { .. } => self.act(ActionKind::Speak, format!("turn {turn}")),
            ScriptSpec::Echo => {
                let heard = ctx
                    .view
                    .history
                    .iter()
                    .rev()
                    .find(|e| e.actor != self.me && e.kind == ActionKind::Speak);
                match heard {
                    Some(e) => self.act(ActionKind::Speak, e.content.clone()),
                    None => quiet,
                }
            }
            ScriptSpec::Silent => quiet,
            ScriptSpec::SpeakOnce { .. } if spoken > 0 => quiet,
            ScriptSpec::SpeakOnce { text } => {
                self.act(ActionKind::Speak, text.clone().unwrap_or_else(|| "hello".to_owned()))
            }
            ScriptSpec::Lines { lines } => match lines.get(spoken) {
                Some(line) => {
                    let mut action = AgentAction::new(self.me.clone(), line.kind, line.text.clone());
                    if let Some(to) = &line.to {
                        action = action.to(to.clone());
                    }
                    Decision::Act(action)
                }
                None => self.act(ActionKind::Leave, ""),
            },
            ScriptSpec::Chatter { reply_probability, idle_ms } => {
                if ctx.rng.random_bool(reply_probability.clamp(0.0, 1.0)) {
                    let n: u32 = ctx.rng.random_range(0..1_000_000);
                    self.act(ActionKind::Speak, format!("chatter {n}"))
                } else {
                    Decision::Wait { wake_after_ms: (*idle_ms > 0).then_some(*idle_ms) }
                }
            }
            ScriptSpec::Failing { failures } if self.calls <= *failures => {
                return Err(PolicyError::Scripted(format!("failure {} of {failures}", self.calls)));
            }
            ScriptSpec::Failing { .. } => self.act(ActionKind::Speak, format!("turn {turn}")),
        };
        Ok(decision)
    }

    fn history_limit(&self) -> Option<usize> {
        match self.script {
            ScriptSpec::Chatter { .. } | ScriptSpec::Silent => Some(32),
            _ => None,
        }
    }
}
