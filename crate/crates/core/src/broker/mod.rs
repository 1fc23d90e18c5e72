//! Turns agent actions into per-recipient observations.
//!
//! The broker is the only channel between agents. Broadcast events reach the
//! whole active roster (actor included, as an echo); direct messages reach the
//! actor and the addressee and nobody else.

mod queue;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    check_constraints, visible_fields, ArityMismatch, CharacterProfile, ObservableProfile, Pk, RelationshipIndex,
    Scenario,
};

pub use queue::MessageQueue;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Speak,
    NonVerbal,
    PhysicalAction,
    None,
    Leave,
}

impl ActionKind {
    pub const ALL: [ActionKind; 5] =
        [ActionKind::Speak, ActionKind::NonVerbal, ActionKind::PhysicalAction, ActionKind::None, ActionKind::Leave];

    /// Wire name used in model replies.
    pub fn label(self) -> &'static str {
        match self {
            ActionKind::Speak => "speak",
            ActionKind::NonVerbal => "non-verbal communication",
            ActionKind::PhysicalAction => "action",
            ActionKind::None => "none",
            ActionKind::Leave => "leave",
        }
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ActionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .trim()
            .to_ascii_lowercase()
            .chars()
            .map(|c| if c == '_' || c == '-' { ' ' } else { c })
            .collect();
        Ok(match norm.as_str() {
            "speak" => ActionKind::Speak,
            "non verbal communication" | "non verbal" | "nonverbal" => ActionKind::NonVerbal,
            "action" | "physical action" => ActionKind::PhysicalAction,
            "none" | "do nothing" => ActionKind::None,
            "leave" => ActionKind::Leave,
            _ => return Err(format!("unknown action type `{s}`")),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Addressee {
    #[default]
    Broadcast,
    Direct(Pk),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentAction {
    pub actor: Pk,
    pub kind: ActionKind,
    #[serde(default)]
    pub content: String,
    #[serde(default)]
    pub addressee: Addressee,
}

impl AgentAction {
    pub fn new(actor: impl Into<Pk>, kind: ActionKind, content: impl Into<String>) -> Self {
        Self { actor: actor.into(), kind, content: content.into(), addressee: Addressee::Broadcast }
    }

    pub fn speak(actor: impl Into<Pk>, content: impl Into<String>) -> Self {
        Self::new(actor, ActionKind::Speak, content)
    }

    pub fn none(actor: impl Into<Pk>) -> Self {
        Self::new(actor, ActionKind::None, "")
    }

    pub fn leave(actor: impl Into<Pk>) -> Self {
        Self::new(actor, ActionKind::Leave, "")
    }

    pub fn to(mut self, addressee: impl Into<Pk>) -> Self {
        self.addressee = Addressee::Direct(addressee.into());
        self
    }
}

/// One perceivable thing that happened, as seen by a recipient.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub actor: Pk,
    pub kind: ActionKind,
    pub content: String,
    pub text: String,
    pub addressee: Addressee,
}

/// Everything scenario-level an agent learns before the first turn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Briefing {
    pub shared_context: String,
    pub own_profile: CharacterProfile,
    pub goal: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub turn: u32,
    pub events: Vec<Event>,
    pub visible_profiles: BTreeMap<Pk, ObservableProfile>,
    pub available_actions: Vec<ActionKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub briefing: Option<Briefing>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Member {
    pub pk: Pk,
    pub name: String,
}

/// The cast of an episode and who has left.
#[derive(Clone, Debug, Default)]
pub struct Roster {
    members: Vec<Member>,
    departed: BTreeSet<Pk>,
}

impl Roster {
    pub fn new(members: Vec<Member>) -> Self {
        Self { members, departed: BTreeSet::new() }
    }

    pub fn from_cast(cast: &[CharacterProfile]) -> Self {
        Self::new(cast.iter().map(|c| Member { pk: c.pk.clone(), name: c.name.clone() }).collect())
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn order(&self) -> Vec<Pk> {
        self.members.iter().map(|m| m.pk.clone()).collect()
    }

    pub fn contains(&self, pk: &Pk) -> bool {
        self.members.iter().any(|m| &m.pk == pk)
    }

    pub fn name_of<'a>(&'a self, pk: &'a Pk) -> &'a str {
        self.members.iter().find(|m| &m.pk == pk).map(|m| m.name.as_str()).unwrap_or(pk.as_str())
    }

    pub fn is_departed(&self, pk: &Pk) -> bool {
        self.departed.contains(pk)
    }

    pub fn departed(&self) -> &BTreeSet<Pk> {
        &self.departed
    }

    pub fn mark_departed(&mut self, pk: &Pk) {
        self.departed.insert(pk.clone());
    }

    pub fn active(&self) -> impl Iterator<Item = &Member> {
        self.members.iter().filter(|m| !self.departed.contains(&m.pk))
    }

    pub fn active_count(&self) -> usize {
        self.active().count()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BrokerError {
    #[error("actor {0} is not in the roster")]
    UnknownActor(Pk),
    #[error("addressee {0} is not in the roster")]
    UnknownAddressee(Pk),
    #[error("actor {0} has already left")]
    ActorDeparted(Pk),
    #[error("actor {0} addressed a direct message to itself")]
    SelfAddressed(Pk),
    #[error(transparent)]
    Arity(#[from] ArityMismatch),
    #[error("cast violates scenario constraints: {}", .0.join("; "))]
    ConstraintViolation(Vec<String>),
}

/// Result of routing one action.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Routing {
    pub deltas: BTreeMap<Pk, Event>,
    /// Set when the action was a Leave.
    pub departed: Option<Pk>,
}

/// Human-readable line for an action, naming the actor and, for private
/// messages, the addressee.
pub fn render_event_text(action: &AgentAction, roster: &Roster) -> String {
    let actor = roster.name_of(&action.actor);
    let target = match &action.addressee {
        Addressee::Broadcast => String::new(),
        Addressee::Direct(pk) => format!(" (privately to {})", roster.name_of(pk)),
    };
    match action.kind {
        ActionKind::Speak => format!("{actor} said{target}: \"{}\"", action.content),
        ActionKind::NonVerbal => format!("{actor} [non-verbal]{target}: {}", action.content),
        ActionKind::PhysicalAction => format!("{actor} [action]{target}: {}", action.content),
        ActionKind::None => format!("{actor} did nothing"),
        ActionKind::Leave => format!("{actor} left the conversation"),
    }
}

/// Decides who perceives `action`. Pure: applying the departure is up to the
/// caller.
pub fn route(action: &AgentAction, roster: &Roster) -> Result<Routing, BrokerError> {
    if !roster.contains(&action.actor) {
        return Err(BrokerError::UnknownActor(action.actor.clone()));
    }
    if roster.is_departed(&action.actor) {
        return Err(BrokerError::ActorDeparted(action.actor.clone()));
    }
    if let Addressee::Direct(to) = &action.addressee {
        if !roster.contains(to) {
            return Err(BrokerError::UnknownAddressee(to.clone()));
        }
        if to == &action.actor {
            return Err(BrokerError::SelfAddressed(to.clone()));
        }
    }
    if action.kind == ActionKind::None {
        return Ok(Routing::default());
    }

    let event = Event {
        actor: action.actor.clone(),
        kind: action.kind,
        content: action.content.clone(),
        text: render_event_text(action, roster),
        addressee: action.addressee.clone(),
    };
    let recipients: Vec<&Pk> = match (&action.addressee, action.kind) {
        (_, ActionKind::Leave) | (Addressee::Broadcast, _) => roster.active().map(|m| &m.pk).collect(),
        (Addressee::Direct(to), _) => {
            let mut r = vec![&action.actor];
            if !roster.is_departed(to) {
                r.push(to);
            }
            r
        }
    };
    let deltas = recipients.into_iter().map(|pk| (pk.clone(), event.clone())).collect();
    let departed = (action.kind == ActionKind::Leave).then(|| action.actor.clone());
    Ok(Routing { deltas, departed })
}

/// Turn-0 observations: shared context, own profile and goal, and what the
/// relationship lets each agent see of the others.
pub fn initial_observations(
    scenario: &Scenario,
    cast: &[CharacterProfile],
    edges: &RelationshipIndex,
) -> Result<BTreeMap<Pk, Observation>, BrokerError> {
    let report = check_constraints(scenario, cast, edges)?;
    if !report.satisfied {
        return Err(BrokerError::ConstraintViolation(report.reasons));
    }
    let shared_context = scenario.shared_text();
    let out = cast
        .iter()
        .zip(&scenario.agent_goals)
        .map(|(me, goal)| {
            let visible_profiles = cast
                .iter()
                .filter(|other| other.pk != me.pk)
                .map(|other| (other.pk.clone(), visible_fields(&me.pk, other, edges.kind(&me.pk, &other.pk))))
                .collect();
            let obs = Observation {
                turn: 0,
                events: Vec::new(),
                visible_profiles,
                available_actions: ActionKind::ALL.to_vec(),
                briefing: Some(Briefing {
                    shared_context: shared_context.clone(),
                    own_profile: me.clone(),
                    goal: goal.clone(),
                }),
            };
            (me.pk.clone(), obs)
        })
        .collect();
    Ok(out)
}

/// Hook for everything that flows through a broker.
pub trait DeliveryTap: Send + Sync {
    fn delivered(&self, recipient: &Pk, turn: u32, event: &Event);
}

/// Routing plus one inbox per agent.
pub struct Broker {
    roster: Roster,
    inboxes: BTreeMap<Pk, Arc<MessageQueue>>,
    tap: Option<Arc<dyn DeliveryTap>>,
    deliveries: u64,
    deliveries_to_others: u64,
}

impl Broker {
    pub fn new(roster: Roster) -> Self {
        let inboxes = roster.members().iter().map(|m| (m.pk.clone(), Arc::new(MessageQueue::new()))).collect();
        Self { roster, inboxes, tap: None, deliveries: 0, deliveries_to_others: 0 }
    }

    pub fn with_tap(mut self, tap: Option<Arc<dyn DeliveryTap>>) -> Self {
        self.tap = tap;
        self
    }

    pub fn roster(&self) -> &Roster {
        &self.roster
    }

    pub fn inbox(&self, pk: &Pk) -> Option<Arc<MessageQueue>> {
        self.inboxes.get(pk).cloned()
    }

    /// Queues an observation outside the normal routing path (turn-0 briefings).
    pub fn deliver(&self, recipient: &Pk, observation: Observation) {
        if let Some(q) = self.inboxes.get(recipient) {
            q.push(observation);
        }
    }

    /// Routes and enqueues; returns the recipients in delivery order.
    pub fn submit(&mut self, turn: u32, action: &AgentAction) -> Result<Vec<Pk>, BrokerError> {
        let routing = route(action, &self.roster)?;
        let available: Vec<ActionKind> = ActionKind::ALL.to_vec();
        let mut recipients = Vec::with_capacity(routing.deltas.len());
        for (recipient, event) in routing.deltas {
            if let Some(tap) = &self.tap {
                tap.delivered(&recipient, turn, &event);
            }
            self.deliveries += 1;
            if recipient != action.actor {
                self.deliveries_to_others += 1;
            }
            if let Some(q) = self.inboxes.get(&recipient) {
                q.push(Observation {
                    turn,
                    events: vec![event],
                    available_actions: available.clone(),
                    ..Observation::default()
                });
            }
            recipients.push(recipient);
        }
        if let Some(pk) = routing.departed {
            self.roster.mark_departed(&pk);
        }
        Ok(recipients)
    }

    /// Marks an agent gone without it having emitted a Leave.
    pub fn expel(&mut self, pk: &Pk) {
        self.roster.mark_departed(pk);
    }

    pub fn deliveries(&self) -> u64 {
        self.deliveries
    }

    pub fn deliveries_to_others(&self) -> u64 {
        self.deliveries_to_others
    }
}
