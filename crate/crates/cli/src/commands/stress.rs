use std::time::{Duration, Instant};

use anyhow::{bail, Result};
use clap::Args;
use serde::Serialize;
use serde_json::json;
use socsim_core::agents::{instantiate, ModelRegistry, PolicySpec, ScriptSpec};
use socsim_core::domain::{CharacterProfile, Scenario};
use socsim_core::engine::{run_setup, Assignment, EpisodeSetup, RunOptions, SimulationConfig, Termination, TurnMode};
use socsim_core::retry::RetryPolicy;

use crate::Output;

#[derive(Debug, Args)]
pub struct StressArgs {
    #[arg(long)]
    pub agents: usize,
    /// Seconds of real time per run.
    #[arg(long)]
    pub duration: f64,
    /// Run every roster size from `step` up to `agents`.
    #[arg(long)]
    pub sweep: bool,
    #[arg(long, default_value_t = 10)]
    pub step: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StressRow {
    pub agents: usize,
    pub elapsed_s: f64,
    /// Actions emitted by agents.
    pub actions: u64,
    /// Observations delivered to someone other than the actor.
    pub deliveries: u64,
    pub actions_per_sec: f64,
    pub deliveries_per_sec: f64,
    pub termination: Termination,
}

/// One simultaneous-mode episode of chatter agents, cut off after `duration`.
pub async fn stress_once(agents: usize, duration: Duration, seed: u64) -> Result<StressRow> {
    if agents == 0 {
        bail!("--agents must be at least 1");
    }
    let cast: Vec<CharacterProfile> =
        (0..agents).map(|i| CharacterProfile::new(format!("agent{i}"), format!("Agent {i}"), 30)).collect();
    let scenario = Scenario::new("stress", "An open group chat.", vec!["Keep the chat going.".to_owned(); agents]);
    let spec = PolicySpec::Scripted(ScriptSpec::Chatter { reply_probability: 0.05, idle_ms: 1_000 });
    let registry = ModelRegistry::default();
    let policies = cast.iter().map(|c| instantiate(&c.pk, &spec, &registry)).collect::<Result<Vec<_>, _>>()?;
    let assignments = cast.iter().map(|c| Assignment { character: c.pk.clone(), policy: spec.clone() }).collect();
    let config = SimulationConfig {
        mode: TurnMode::Simultaneous,
        max_turns: u32::MAX,
        wall_clock_budget_ms: Some(u64::MAX),
        seed,
        ..SimulationConfig::new("stress", assignments)
    };
    let started = Instant::now();
    let opts = RunOptions { deadline: Some(started + duration), ..RunOptions::default() };
    let setup = EpisodeSetup { scenario, cast, edges: Vec::new(), policies };
    let outcome = run_setup(&config, setup, RetryPolicy::default(), &opts).await?;
    let elapsed = started.elapsed().as_secs_f64().max(f64::EPSILON);
    let actions = outcome.transcript.len() as u64;
    Ok(StressRow {
        agents,
        elapsed_s: elapsed,
        actions,
        deliveries: outcome.deliveries_to_others,
        actions_per_sec: actions as f64 / elapsed,
        deliveries_per_sec: outcome.deliveries_to_others as f64 / elapsed,
        termination: outcome.termination,
    })
}

pub fn rungs(agents: usize, step: usize, sweep: bool) -> Vec<usize> {
    if !sweep {
        return vec![agents];
    }
    let step = step.max(1);
    let mut sizes: Vec<usize> = (1..).map(|k| k * step).take_while(|n| *n <= agents).collect();
    if sizes.last() != Some(&agents) {
        sizes.push(agents);
    }
    sizes
}

pub async fn run(args: StressArgs, out: &mut Output<'_>) -> Result<()> {
    if !(args.duration.is_finite() && args.duration >= 0.0) {
        bail!("--duration must be a non-negative number of seconds");
    }
    let duration = Duration::from_secs_f64(args.duration);
    let mut rows = Vec::new();
    let mut text = String::from("agents,elapsed_s,actions,actions_per_sec,deliveries,deliveries_per_sec\n");
    for agents in rungs(args.agents, args.step, args.sweep) {
        let row = stress_once(agents, duration, args.seed).await?;
        text.push_str(&format!(
            "{},{:.2},{},{:.1},{},{:.1}\n",
            row.agents, row.elapsed_s, row.actions, row.actions_per_sec, row.deliveries, row.deliveries_per_sec
        ));
        rows.push(row);
    }
    out.emit(&text, &json!({"rows": rows}))
}
