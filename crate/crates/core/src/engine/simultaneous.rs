//! Simultaneous turn-taking on a simulated clock.
//!
//! Each agent runs as its own task. A coordinator (which owns the broker)
//! wakes agents when something reaches their inbox or a requested timer
//! fires, collects their decisions, and emits each chosen action after a
//! reaction delay drawn from the agent's latency stream. Agents woken at the
//! same simulated instant decide concurrently; their replies are applied in
//! roster order, so a run is a pure function of config and seed.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tokio::sync::{mpsc, oneshot};
use tokio::task::JoinSet;

use super::record::{TranscriptEntry, DEFAULT_SIMULTANEOUS_BUDGET_MS};
use super::round_robin::Finished;
use super::runtime::{AgentRuntime, TurnOutcome};
use super::schedule::{check_termination, TerminationState, Verdict};
use super::{RunOptions, SimulationConfig};
use crate::agents::Decision;
use crate::broker::{ActionKind, AgentAction, Broker, Observation};
use crate::domain::Pk;

struct WakeMsg {
    turn: u32,
    observations: Vec<Observation>,
    reply: oneshot::Sender<TurnOutcome>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    Emit,
    Timer { generation: u64 },
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum SlotState {
    Idle,
    Pending,
    Gone,
}

struct Slot {
    pk: Pk,
    tx: mpsc::UnboundedSender<WakeMsg>,
    state: SlotState,
    generation: u64,
    latency: ChaCha8Rng,
    pending: Option<AgentAction>,
    /// Something arrived while the agent was waiting to emit.
    missed: bool,
}

pub(super) async fn run(
    config: &SimulationConfig,
    broker: &mut Broker,
    agents: Vec<AgentRuntime>,
    latency_rngs: Vec<ChaCha8Rng>,
    opts: &RunOptions,
) -> Finished {
    let budget = config.wall_clock_budget_ms.unwrap_or(DEFAULT_SIMULTANEOUS_BUDGET_MS);
    let (lat_lo, lat_hi) = {
        let l = config.latency;
        (l.min_ms.min(l.max_ms), l.max_ms.max(l.min_ms))
    };
    let roster_size = agents.len();

    let mut tasks = JoinSet::new();
    let mut slots = Vec::with_capacity(roster_size);
    for (mut agent, latency) in agents.into_iter().zip(latency_rngs) {
        let (tx, mut rx) = mpsc::unbounded_channel::<WakeMsg>();
        slots.push(Slot {
            pk: agent.pk.clone(),
            tx,
            state: SlotState::Idle,
            generation: 0,
            latency,
            pending: None,
            missed: false,
        });
        tasks.spawn(async move {
            while let Some(msg) = rx.recv().await {
                let outcome = agent.take_turn(msg.turn, msg.observations).await;
                if msg.reply.send(outcome).is_err() {
                    break;
                }
            }
        });
    }
    let slot_of: BTreeMap<Pk, usize> = slots.iter().enumerate().map(|(i, s)| (s.pk.clone(), i)).collect();

    let mut heap: BinaryHeap<Reverse<(u64, u64, usize, EventKind)>> = BinaryHeap::new();
    let mut seq: u64 = 0;
    for i in 0..roster_size {
        heap.push(Reverse((0, seq, i, EventKind::Timer { generation: 0 })));
        seq += 1;
    }

    let mut transcript: Vec<TranscriptEntry> = Vec::new();
    let mut notes = Vec::new();
    let mut departure_error: Option<String> = None;
    let mut budget_exhausted = false;
    let mut actions: u32 = 0;

    macro_rules! verdict {
        () => {
            check_termination(&TerminationState {
                roster_size,
                active: broker.roster().active_count(),
                transcript: &transcript,
                turns: actions,
                max_turns: config.max_turns,
                goal: config.goal_condition.as_ref(),
                budget_exhausted,
                departure_error: departure_error.as_deref(),
            })
        };
    }

    let termination = 'run: loop {
        if let Verdict::Terminate(t) = verdict!() {
            break t;
        }
        if opts.deadline.is_some_and(|d| std::time::Instant::now() >= d) {
            budget_exhausted = true;
            continue;
        }
        let now = match heap.peek() {
            Some(Reverse((t, ..))) if *t < budget => *t,
            // Nothing left to happen, or the next thing is past the budget.
            _ => {
                budget_exhausted = true;
                continue;
            }
        };

        let mut to_wake = BTreeSet::new();
        while let Some(Reverse((t, _, slot, kind))) = heap.peek().copied() {
            if t != now {
                break;
            }
            heap.pop();
            match kind {
                EventKind::Timer { generation } => {
                    let s = &slots[slot];
                    if s.state == SlotState::Idle && s.generation == generation {
                        to_wake.insert(slot);
                    }
                }
                EventKind::Emit => {
                    let Some(action) = slots[slot].pending.take() else { continue };
                    slots[slot].state = SlotState::Idle;
                    let turn = actions + 1;
                    let recipients = match broker.submit(turn, &action) {
                        Ok(r) => r,
                        Err(e) => {
                            notes.push(format!("{}: undeliverable action dropped ({e})", slots[slot].pk));
                            continue;
                        }
                    };
                    actions = turn;
                    if action.kind == ActionKind::Leave {
                        slots[slot].state = SlotState::Gone;
                    }
                    for r in &recipients {
                        let i = slot_of[r];
                        if i == slot {
                            continue;
                        }
                        match slots[i].state {
                            SlotState::Idle => {
                                to_wake.insert(i);
                            }
                            SlotState::Pending => slots[i].missed = true,
                            SlotState::Gone => {}
                        }
                    }
                    if slots[slot].state == SlotState::Idle && std::mem::take(&mut slots[slot].missed) {
                        to_wake.insert(slot);
                    }
                    let entry = TranscriptEntry { turn, actor: action.actor.clone(), action };
                    if let Some(observer) = &opts.observer {
                        observer.on_action(&entry);
                    }
                    transcript.push(entry);
                    if let Verdict::Terminate(t) = verdict!() {
                        break 'run t;
                    }
                }
            }
        }

        let mut replies = Vec::with_capacity(to_wake.len());
        for i in to_wake {
            let s = &mut slots[i];
            if s.state != SlotState::Idle {
                continue;
            }
            s.generation += 1;
            let observations = broker.inbox(&s.pk).map(|q| q.drain()).unwrap_or_default();
            let (reply, rx) = oneshot::channel();
            if s.tx.send(WakeMsg { turn: actions + 1, observations, reply }).is_ok() {
                replies.push((i, rx));
            } else {
                replies.push((i, oneshot::channel().1));
            }
        }
        for (i, rx) in replies {
            let outcome = match opts.deadline {
                Some(deadline) => match tokio::time::timeout_at(deadline.into(), rx).await {
                    Ok(r) => r,
                    Err(_) => {
                        budget_exhausted = true;
                        continue 'run;
                    }
                },
                None => rx.await,
            };
            let pk = slots[i].pk.clone();
            match outcome {
                Ok(TurnOutcome::Decided(Decision::Act(mut action))) if action.kind != ActionKind::None => {
                    action.actor = pk;
                    let delay = slots[i].latency.random_range(lat_lo..=lat_hi);
                    slots[i].pending = Some(action);
                    slots[i].state = SlotState::Pending;
                    heap.push(Reverse((now + delay, seq, i, EventKind::Emit)));
                    seq += 1;
                }
                Ok(TurnOutcome::Decided(decision)) => {
                    if let Decision::Wait { wake_after_ms: Some(ms) } = decision {
                        let generation = slots[i].generation;
                        heap.push(Reverse((now.saturating_add(ms.max(1)), seq, i, EventKind::Timer { generation })));
                        seq += 1;
                    }
                }
                Ok(TurnOutcome::Failed { error, expel }) => {
                    notes.push(format!("{pk} failed to decide: {error}"));
                    if expel {
                        let why = format!("{pk} removed after repeated failures: {error}");
                        notes.push(why.clone());
                        broker.expel(&pk);
                        slots[i].state = SlotState::Gone;
                        departure_error = Some(why);
                    }
                }
                Err(_) => {
                    let why = format!("{pk} agent task stopped unexpectedly");
                    notes.push(why.clone());
                    broker.expel(&pk);
                    slots[i].state = SlotState::Gone;
                    departure_error = Some(why);
                }
            }
        }
    };

    drop(slots);
    tasks.abort_all();
    Finished { transcript, termination, notes }
}
