//! Drives episodes to completion and runs batches of them in parallel.

mod record;
mod round_robin;
mod runtime;
mod schedule;
mod simultaneous;

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Instant;

use chrono::Utc;
use thiserror::Error;
use tokio::sync::Semaphore;

pub use record::{
    Assignment, EpisodeRecord, GoalCondition, LatencyRange, SimulationConfig, SimulationState, SimulationStatus,
    Termination, TranscriptEntry, TurnMode, DEFAULT_MAX_TURNS, DEFAULT_SIMULTANEOUS_BUDGET_MS,
};
pub use runtime::{AgentRuntime, TurnOutcome, MAX_CONSECUTIVE_FAILURES};
pub use schedule::{check_termination, next_actor_round_robin, TerminationState, Verdict};

use crate::agents::{agent_rng, instantiate, AgentView, ChatModel, LlmError, ModelRegistry, Policy, PROMPT_VERSION};
use crate::broker::{initial_observations, Broker, DeliveryTap, Roster};
use crate::domain::{CharacterProfile, Pk, Relationship, RelationshipIndex, Scenario};
use crate::evaluation::{judge_episode, validate_metrics, DimensionScore, JudgeContext};
use crate::persistence::{Store, StoreError};
use crate::retry::RetryPolicy;

const POLICY_STREAM: u64 = 0;
const LATENCY_STREAM: u64 = 1;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("cannot resolve episode inputs: {0}")]
    Resolution(String),
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// A chat model used to score finished episodes.
#[derive(Clone)]
pub struct JudgeHandle {
    pub model: Arc<dyn ChatModel>,
    pub model_name: String,
}

/// Shared services for running episodes.
#[derive(Clone)]
pub struct EngineContext {
    pub store: Store,
    pub models: Arc<ModelRegistry>,
    pub judge: Option<JudgeHandle>,
    pub retry: RetryPolicy,
}

impl EngineContext {
    pub fn new(store: Store) -> Self {
        Self { store, models: Arc::new(ModelRegistry::default()), judge: None, retry: RetryPolicy::default() }
    }

    pub fn with_judge(mut self, model: Arc<dyn ChatModel>, model_name: impl Into<String>) -> Self {
        self.judge = Some(JudgeHandle { model, model_name: model_name.into() });
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_models(mut self, models: Arc<ModelRegistry>) -> Self {
        self.models = models;
        self
    }
}

/// Receives transcript entries and scores as they are produced.
pub trait EpisodeObserver: Send + Sync {
    fn on_action(&self, entry: &TranscriptEntry);

    fn on_evaluation(&self, _score: &DimensionScore) {}
}

#[derive(Clone, Default)]
pub struct RunOptions {
    /// Pk for the record; generated when absent.
    pub episode_pk: Option<Pk>,
    pub observer: Option<Arc<dyn EpisodeObserver>>,
    /// Real-time cutoff; reaching it ends the episode with `Budget`.
    pub deadline: Option<Instant>,
    pub tap: Option<Arc<dyn DeliveryTap>>,
}

/// Everything an episode needs, already loaded.
pub struct EpisodeSetup {
    pub scenario: Scenario,
    pub cast: Vec<CharacterProfile>,
    pub edges: Vec<Relationship>,
    pub policies: Vec<Box<dyn Policy>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunOutcome {
    pub transcript: Vec<TranscriptEntry>,
    pub termination: Termination,
    pub notes: Vec<String>,
    pub deliveries: u64,
    pub deliveries_to_others: u64,
}

/// Rejects configs that can never run, before touching the store.
pub fn validate_config(config: &SimulationConfig) -> Result<(), EngineError> {
    let mut problems = Vec::new();
    if config.max_turns < 1 {
        problems.push("max_turns must be at least 1".to_owned());
    }
    if config.assignments.is_empty() {
        problems.push("at least one assignment is required".to_owned());
    }
    let distinct: BTreeSet<&Pk> = config.assignments.iter().map(|a| &a.character).collect();
    if distinct.len() != config.assignments.len() {
        problems.push("a character may fill only one slot".to_owned());
    }
    for (i, a) in config.assignments.iter().enumerate() {
        if let Err(e) = a.policy.validate() {
            problems.push(format!("assignment {i}: {e}"));
        }
    }
    problems.extend(validate_metrics(&config.metrics));
    if problems.is_empty() {
        Ok(())
    } else {
        Err(EngineError::Config(problems.join("; ")))
    }
}

fn not_found_as_resolution(e: StoreError) -> EngineError {
    match e {
        StoreError::NotFound { .. } | StoreError::Corrupt { .. } => EngineError::Resolution(e.to_string()),
        other => EngineError::Store(other),
    }
}

/// Loads the scenario, cast and relationships and instantiates policies.
pub async fn resolve(ctx: &EngineContext, config: &SimulationConfig) -> Result<EpisodeSetup, EngineError> {
    validate_config(config)?;
    let scenario = ctx.store.get_scenario(&config.scenario).await.map_err(not_found_as_resolution)?;
    if scenario.arity() != config.assignments.len() {
        return Err(EngineError::Resolution(format!(
            "scenario `{}` needs {} agents, config assigns {}",
            scenario.pk,
            scenario.arity(),
            config.assignments.len()
        )));
    }
    let mut cast = Vec::with_capacity(config.assignments.len());
    for a in &config.assignments {
        cast.push(ctx.store.get_character(&a.character).await.map_err(not_found_as_resolution)?);
    }
    let members: BTreeSet<&Pk> = cast.iter().map(|c| &c.pk).collect();
    let edges = ctx
        .store
        .relationships()
        .await
        .map_err(not_found_as_resolution)?
        .into_iter()
        .filter(|r| members.contains(&r.char_a) && members.contains(&r.char_b))
        .collect();
    let policies = config
        .assignments
        .iter()
        .map(|a| instantiate(&a.character, &a.policy, &ctx.models))
        .collect::<Result<Vec<_>, LlmError>>()
        .map_err(|e| EngineError::Config(e.to_string()))?;
    Ok(EpisodeSetup { scenario, cast, edges, policies })
}

/// Runs one episode from loaded inputs without touching the store.
pub async fn run_setup(
    config: &SimulationConfig,
    setup: EpisodeSetup,
    retry: RetryPolicy,
    opts: &RunOptions,
) -> Result<RunOutcome, EngineError> {
    let EpisodeSetup { scenario, cast, edges, policies } = setup;
    let index = RelationshipIndex::new(&edges);
    let mut initial = initial_observations(&scenario, &cast, &index).map_err(|e| EngineError::Resolution(e.to_string()))?;
    let roster = Roster::from_cast(&cast);
    let mut broker = Broker::new(roster.clone()).with_tap(opts.tap.clone());
    let mut agents = Vec::with_capacity(cast.len());
    let mut latency_rngs = Vec::with_capacity(cast.len());
    for (slot, (profile, policy)) in cast.iter().zip(policies).enumerate() {
        if let Some(obs) = initial.remove(&profile.pk) {
            broker.deliver(&profile.pk, obs);
        }
        let view = AgentView::new(profile.pk.clone(), roster.members().to_vec());
        let rng = agent_rng(config.seed, slot, POLICY_STREAM);
        agents.push(AgentRuntime::new(profile.pk.clone(), policy, view, rng, retry));
        latency_rngs.push(agent_rng(config.seed, slot, LATENCY_STREAM));
    }
    let finished = match config.mode {
        TurnMode::RoundRobin => round_robin::run(config, &mut broker, &mut agents, opts).await,
        TurnMode::Simultaneous => simultaneous::run(config, &mut broker, agents, latency_rngs, opts).await,
    };
    Ok(RunOutcome {
        transcript: finished.transcript,
        termination: finished.termination,
        notes: finished.notes,
        deliveries: broker.deliveries(),
        deliveries_to_others: broker.deliveries_to_others(),
    })
}

/// Resolves, runs, scores and persists one episode.
pub async fn run_episode(
    ctx: &EngineContext,
    config: &SimulationConfig,
    opts: &RunOptions,
) -> Result<EpisodeRecord, EngineError> {
    let setup = resolve(ctx, config).await?;
    let scenario = setup.scenario.clone();
    let cast = setup.cast.clone();
    let outcome = run_setup(config, setup, ctx.retry, opts).await?;

    let mut record = EpisodeRecord {
        pk: opts.episode_pk.clone().unwrap_or_else(Pk::generate),
        version: 1,
        scenario: config.scenario.clone(),
        cast: config.cast(),
        policies: config.assignments.iter().map(|a| a.policy.clone()).collect(),
        mode: config.mode,
        tag: config.tag.clone(),
        seed: config.seed,
        transcript: outcome.transcript,
        termination: outcome.termination,
        evaluations: Vec::new(),
        evaluation_errors: Vec::new(),
        notes: outcome.notes,
        prompt_version: PROMPT_VERSION.to_owned(),
        created_at: Utc::now(),
    };

    if !config.metrics.is_empty() {
        match &ctx.judge {
            Some(judge) => {
                let judged = judge_episode(
                    &record,
                    JudgeContext { scenario: &scenario, cast: &cast },
                    &config.metrics,
                    judge.model.as_ref(),
                    &judge.model_name,
                    &ctx.retry,
                )
                .await;
                if let Some(observer) = &opts.observer {
                    judged.scores.iter().for_each(|s| observer.on_evaluation(s));
                }
                record.evaluations = judged.scores;
                record.evaluation_errors = judged.errors;
            }
            None => record.evaluation_errors.push("metrics requested but no judge is configured".to_owned()),
        }
    }

    ctx.store.put_episode(&record).await?;
    Ok(record)
}

/// Runs an episode whose `Queued` status is already stored, recording the
/// transitions to `Running` and then `Completed` or `Failed`.
pub async fn run_tracked(
    ctx: &EngineContext,
    config: &SimulationConfig,
    episode_pk: Pk,
) -> Result<EpisodeRecord, EngineError> {
    let mut status = match ctx.store.get_status(&episode_pk).await {
        Ok(s) => s,
        Err(StoreError::NotFound { .. }) => SimulationStatus::queued(episode_pk.clone()),
        Err(e) => return Err(e.into()),
    };
    status.advance(SimulationState::Running);
    ctx.store.put_status(&status).await?;

    let opts = RunOptions { episode_pk: Some(episode_pk), ..RunOptions::default() };
    let result = run_episode(ctx, config, &opts).await;
    match &result {
        Ok(record) => {
            status.progress = Some(record.transcript.len() as u32);
            status.advance(SimulationState::Completed);
        }
        Err(e) => {
            status.error = Some(e.to_string());
            status.advance(SimulationState::Failed);
        }
    }
    ctx.store.put_status(&status).await?;
    result
}

/// Stores a fresh `Queued` status and returns its episode pk.
pub async fn enqueue(ctx: &EngineContext) -> Result<Pk, EngineError> {
    let pk = Pk::generate();
    ctx.store.put_status(&SimulationStatus::queued(pk.clone())).await?;
    Ok(pk)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BatchEntry {
    pub episode_pk: Pk,
    pub result: Result<(), String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BatchReport {
    /// One entry per config, in input order.
    pub entries: Vec<BatchEntry>,
    pub peak_in_flight: usize,
}

/// Runs every config with at most `parallelism` in flight. A failing
/// episode is recorded as `Failed` and does not stop the rest.
pub async fn run_batch(ctx: &EngineContext, configs: Vec<SimulationConfig>, parallelism: usize) -> BatchReport {
    let limiter = Arc::new(Semaphore::new(parallelism.max(1)));
    let in_flight = Arc::new(AtomicUsize::new(0));
    let peak = Arc::new(AtomicUsize::new(0));
    let mut handles = Vec::with_capacity(configs.len());
    for config in configs {
        let pk = match enqueue(ctx).await {
            Ok(pk) => pk,
            Err(e) => {
                handles.push((Pk::generate(), None, Some(e.to_string())));
                continue;
            }
        };
        let ctx = ctx.clone();
        let (limiter, in_flight, peak) = (Arc::clone(&limiter), Arc::clone(&in_flight), Arc::clone(&peak));
        let episode_pk = pk.clone();
        let handle = tokio::spawn(async move {
            let _permit = limiter.acquire_owned().await.expect("semaphore never closed");
            let now = in_flight.fetch_add(1, Ordering::SeqCst) + 1;
            peak.fetch_max(now, Ordering::SeqCst);
            let result = run_tracked(&ctx, &config, episode_pk).await.map(|_| ()).map_err(|e| e.to_string());
            in_flight.fetch_sub(1, Ordering::SeqCst);
            result
        });
        handles.push((pk, Some(handle), None));
    }
    let mut entries = Vec::with_capacity(handles.len());
    for (episode_pk, handle, early) in handles {
        let result = match (handle, early) {
            (Some(h), _) => h.await.unwrap_or_else(|e| Err(format!("episode task failed: {e}"))),
            (None, err) => Err(err.unwrap_or_default()),
        };
        entries.push(BatchEntry { episode_pk, result });
    }
    BatchReport { entries, peak_in_flight: peak.load(Ordering::SeqCst) }
}
