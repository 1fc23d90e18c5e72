use super::record::{Termination, TranscriptEntry};
use super::runtime::{AgentRuntime, TurnOutcome};
use super::schedule::{check_termination, next_actor_round_robin, TerminationState, Verdict};
use super::{RunOptions, SimulationConfig};
use crate::agents::Decision;
use crate::broker::{AgentAction, Broker};

pub(super) struct Finished {
    pub transcript: Vec<TranscriptEntry>,
    pub termination: Termination,
    pub notes: Vec<String>,
}

/// Fixed circular order; every active agent acts once per round. Stopping
/// rules are checked between rounds.
pub(super) async fn run(
    config: &SimulationConfig,
    broker: &mut Broker,
    agents: &mut [AgentRuntime],
    opts: &RunOptions,
) -> Finished {
    let order = broker.roster().order();
    let n = order.len() as u64;
    let mut transcript = Vec::new();
    let mut notes = Vec::new();
    let mut departure_error: Option<String> = None;
    let mut round: u32 = 0;

    loop {
        let budget_exhausted = opts.deadline.is_some_and(|d| std::time::Instant::now() >= d);
        let state = TerminationState {
            roster_size: order.len(),
            active: broker.roster().active_count(),
            transcript: &transcript,
            turns: round,
            max_turns: config.max_turns,
            goal: config.goal_condition.as_ref(),
            budget_exhausted,
            departure_error: departure_error.as_deref(),
        };
        if let Verdict::Terminate(t) = check_termination(&state) {
            return Finished { transcript, termination: t, notes };
        }

        round += 1;
        let end = u64::from(round) * n;
        let mut cursor = end - n;
        while let Some((step, actor)) = next_actor_round_robin(&order, cursor, broker.roster().departed()) {
            if step >= end {
                break;
            }
            cursor = step + 1;
            let slot = (step % n) as usize;
            let agent = &mut agents[slot];
            let observations = broker.inbox(actor).map(|q| q.drain()).unwrap_or_default();
            let mut action = match agent.take_turn(round, observations).await {
                TurnOutcome::Decided(Decision::Act(action)) => action,
                TurnOutcome::Decided(Decision::Wait { .. }) => AgentAction::none(actor.clone()),
                TurnOutcome::Failed { error, expel } => {
                    notes.push(format!("round {round}: {actor} failed to decide: {error}"));
                    if expel {
                        let why = format!("{actor} removed after repeated failures: {error}");
                        notes.push(why.clone());
                        broker.expel(actor);
                        departure_error = Some(why);
                        continue;
                    }
                    AgentAction::none(actor.clone())
                }
            };
            action.actor = actor.clone();
            if let Err(e) = broker.submit(round, &action) {
                notes.push(format!("round {round}: {actor} produced an undeliverable action ({e}); recorded as none"));
                action = AgentAction::none(actor.clone());
                broker.submit(round, &action).expect("a none action from an active agent always routes");
            }
            let entry = TranscriptEntry { turn: round, actor: actor.clone(), action };
            if let Some(observer) = &opts.observer {
                observer.on_action(&entry);
            }
            transcript.push(entry);
        }
    }
}
