use serde::{Deserialize, Serialize};

use super::llm::ChatMessage;
use super::policy::AgentView;

/// Bumped whenever the wording below changes, so scores from different
/// prompt versions are not mixed up.
pub const PROMPT_VERSION: &str = "roleplay-v1";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub version: String,
    pub system: String,
    /// One line per other participant this agent knows anything about.
    pub other_agents: Vec<String>,
    pub history: Vec<String>,
    pub turn_instruction: String,
}

const ACTION_FORMAT: &str = "\
Reply with exactly these lines and nothing else:
action_type: <speak|non-verbal communication|action|none|leave>
argument: <what you say, or a short description of what you do>
to: <name>   (optional; only to send a private message to one participant)";

/// Assembles the role-play prompt from this agent's own observations only.
pub fn build_prompt(view: &AgentView, turn: u32) -> PromptBundle {
    let (name, profile_lines, context, goal) = match &view.briefing {
        Some(b) => (
            b.own_profile.name.clone(),
            b.own_profile.full_view().into_iter().map(|(k, v)| format!("- {k}: {v}")).collect::<Vec<_>>(),
            b.shared_context.clone(),
            b.goal.clone(),
        ),
        None => (view.me.to_string(), Vec::new(), String::new(), String::new()),
    };

    let other_agents: Vec<String> = view
        .visible_profiles
        .values()
        .filter(|p| !p.is_empty())
        .map(|p| {
            let who = p.get("name").unwrap_or("someone");
            let facts = p
                .fields()
                .iter()
                .filter(|(k, _)| k.as_str() != "name")
                .map(|(k, v)| format!("{k}: {v}"))
                .collect::<Vec<_>>()
                .join("; ");
            if facts.is_empty() {
                format!("- {who}")
            } else {
                format!("- {who} ({facts})")
            }
        })
        .collect();

    let mut system = format!("You are {name}. Stay in character for the whole conversation.\n\n");
    system.push_str("Your profile:\n");
    for line in &profile_lines {
        system.push_str(line);
        system.push('\n');
    }
    system.push_str(&format!("\nScenario:\n{context}\n\n"));
    system.push_str(&format!("Your private goal (never state it outright): {goal}\n\n"));
    system.push_str("Other participants you know about:\n");
    if other_agents.is_empty() {
        system.push_str("(none)\n");
    } else {
        for line in &other_agents {
            system.push_str(line);
            system.push('\n');
        }
    }
    system.push('\n');
    system.push_str(ACTION_FORMAT);

    PromptBundle {
        version: PROMPT_VERSION.to_owned(),
        system,
        other_agents,
        history: view.history.iter().map(|e| e.text.clone()).collect(),
        turn_instruction: format!("Turn {turn}. You are {name}. What do you do next?"),
    }
}

impl PromptBundle {
    pub fn to_messages(&self) -> Vec<ChatMessage> {
        let mut user = String::from("Conversation so far:\n");
        if self.history.is_empty() {
            user.push_str("(nothing yet)\n");
        }
        for line in &self.history {
            user.push_str(line);
            user.push('\n');
        }
        user.push('\n');
        user.push_str(&self.turn_instruction);
        vec![ChatMessage::system(self.system.clone()), ChatMessage::user(user)]
    }

    /// Every byte the model will see.
    pub fn full_text(&self) -> String {
        self.to_messages().into_iter().map(|m| m.content).collect::<Vec<_>>().join("\n")
    }
}
