use std::collections::BTreeSet;

use super::record::{GoalCondition, Termination, TranscriptEntry};
use crate::domain::Pk;

/// Picks who acts at step `turn`: `order[turn % n]`, advancing past departed
/// agents. Returns the step actually used with the actor, or `None` when
/// everyone has departed.
pub fn next_actor_round_robin<'a>(order: &'a [Pk], turn: u64, departed: &BTreeSet<Pk>) -> Option<(u64, &'a Pk)> {
    let n = order.len() as u64;
    (turn..turn + n).map(|step| (step, &order[(step % n) as usize])).find(|(_, pk)| !departed.contains(*pk))
}

/// Inputs to the stopping rules.
#[derive(Clone, Copy, Debug)]
pub struct TerminationState<'a> {
    pub roster_size: usize,
    pub active: usize,
    pub transcript: &'a [TranscriptEntry],
    /// Rounds in round-robin mode, actions in simultaneous mode.
    pub turns: u32,
    pub max_turns: u32,
    pub goal: Option<&'a GoalCondition>,
    pub budget_exhausted: bool,
    /// Set when the most recent departure was an agent failure.
    pub departure_error: Option<&'a str>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Continue,
    Terminate(Termination),
}

/// Priority: all left, then goal condition, then max turns, then budget.
pub fn check_termination(state: &TerminationState<'_>) -> Verdict {
    let all_left = match state.roster_size {
        0 => true,
        1 => state.active == 0,
        2 => state.active < 2,
        _ => state.active < 2,
    };
    if all_left {
        return Verdict::Terminate(match state.departure_error {
            Some(why) => Termination::Error(why.to_owned()),
            None => Termination::AllLeft,
        });
    }
    if state.goal.is_some_and(|g| g.met(state.transcript)) {
        return Verdict::Terminate(Termination::GoalCondition);
    }
    if state.turns >= state.max_turns {
        return Verdict::Terminate(Termination::MaxTurns);
    }
    if state.budget_exhausted {
        return Verdict::Terminate(Termination::Budget);
    }
    Verdict::Continue
}
