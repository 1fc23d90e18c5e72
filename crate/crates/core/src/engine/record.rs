use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::agents::PolicySpec;
use crate::broker::AgentAction;
use crate::domain::Pk;
use crate::evaluation::{DimensionScore, EvaluationMetric};

pub const DEFAULT_MAX_TURNS: u32 = 20;
/// Simulated-clock budget used in simultaneous mode when none is configured.
pub const DEFAULT_SIMULTANEOUS_BUDGET_MS: u64 = 60_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnMode {
    #[default]
    RoundRobin,
    Simultaneous,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub character: Pk,
    pub policy: PolicySpec,
}

/// Reaction delay drawn per action in simultaneous mode, in simulated ms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatencyRange {
    pub min_ms: u64,
    pub max_ms: u64,
}

impl Default for LatencyRange {
    fn default() -> Self {
        Self { min_ms: 0, max_ms: 500 }
    }
}

/// Ends the episode early once some transcript entry contains `pattern`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalCondition {
    ContentContains { pattern: String },
}

impl GoalCondition {
    pub fn met(&self, transcript: &[TranscriptEntry]) -> bool {
        match self {
            GoalCondition::ContentContains { pattern } => {
                transcript.iter().any(|e| e.action.content.contains(pattern.as_str()))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub scenario: Pk,
    pub assignments: Vec<Assignment>,
    #[serde(default)]
    pub mode: TurnMode,
    #[serde(default = "default_max_turns")]
    pub max_turns: u32,
    #[serde(default)]
    pub metrics: Vec<EvaluationMetric>,
    /// Simultaneous mode only, measured on the simulated clock.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_budget_ms: Option<u64>,
    #[serde(default)]
    pub latency: LatencyRange,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal_condition: Option<GoalCondition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
    #[serde(default)]
    pub seed: u64,
}

fn default_max_turns() -> u32 {
    DEFAULT_MAX_TURNS
}

impl SimulationConfig {
    pub fn new(scenario: impl Into<Pk>, assignments: Vec<Assignment>) -> Self {
        Self {
            scenario: scenario.into(),
            assignments,
            mode: TurnMode::RoundRobin,
            max_turns: DEFAULT_MAX_TURNS,
            metrics: Vec::new(),
            wall_clock_budget_ms: None,
            latency: LatencyRange::default(),
            goal_condition: None,
            tag: None,
            seed: 0,
        }
    }

    pub fn cast(&self) -> Vec<Pk> {
        self.assignments.iter().map(|a| a.character.clone()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub turn: u32,
    pub actor: Pk,
    pub action: AgentAction,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    AllLeft,
    MaxTurns,
    GoalCondition,
    Budget,
    Error(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub pk: Pk,
    #[serde(default = "crate::domain::default_schema_version")]
    pub version: u32,
    pub scenario: Pk,
    pub cast: Vec<Pk>,
    pub policies: Vec<PolicySpec>,
    #[serde(default)]
    pub mode: TurnMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
    #[serde(default)]
    pub seed: u64,
    pub transcript: Vec<TranscriptEntry>,
    pub termination: Termination,
    #[serde(default)]
    pub evaluations: Vec<DimensionScore>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub evaluation_errors: Vec<String>,
    /// Agent failures and other irregularities during the run.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default)]
    pub prompt_version: String,
    pub created_at: DateTime<Utc>,
}

impl EpisodeRecord {
    /// Transcript turns never decrease and nobody acts after leaving.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.transcript.windows(2).any(|w| w[1].turn < w[0].turn) {
            return Err("transcript turns decrease".into());
        }
        let mut gone = std::collections::BTreeSet::new();
        for entry in &self.transcript {
            if gone.contains(&entry.actor) {
                return Err(format!("{} acted after leaving", entry.actor));
            }
            if entry.action.kind == crate::broker::ActionKind::Leave {
                gone.insert(entry.actor.clone());
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimulationState {
    Queued,
    Running,
    Completed,
    Failed,
}

impl SimulationState {
    pub fn is_terminal(self) -> bool {
        matches!(self, SimulationState::Completed | SimulationState::Failed)
    }

    /// Queued → Running → Completed | Failed, plus Queued → Failed when a
    /// run cannot start.
    pub fn may_follow(self, previous: SimulationState) -> bool {
        use SimulationState::*;
        matches!((previous, self), (Queued, Running) | (Queued, Failed) | (Running, Completed) | (Running, Failed))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationStatus {
    pub episode_pk: Pk,
    pub status: SimulationState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub progress: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Every state this run has been in, oldest first.
    #[serde(default)]
    pub history: Vec<SimulationState>,
}

impl SimulationStatus {
    pub fn queued(episode_pk: Pk) -> Self {
        Self {
            episode_pk,
            status: SimulationState::Queued,
            progress: None,
            error: None,
            history: vec![SimulationState::Queued],
        }
    }

    pub fn advance(&mut self, next: SimulationState) {
        debug_assert!(next.may_follow(self.status), "{:?} -> {next:?}", self.status);
        self.status = next;
        self.history.push(next);
    }
}
