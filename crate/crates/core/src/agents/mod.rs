//! Agent policies: scripted ones for reproducible runs, and LLM-backed ones
//! that prompt a chat model and parse its reply into an action.

pub mod llm;
mod parse;
mod policy;
mod prompt;
mod scripted;

use rand_chacha::ChaCha8Rng;

pub use llm::{ChatMessage, ChatModel, ChatReply, ChatRequest, LlmError, LlmPolicy, ModelRegistry};
pub use parse::{parse_action, render_action, ParseFailure};
pub use policy::{AgentView, Decision, DecisionContext, LlmSpec, Policy, PolicyError, PolicySpec};
pub use prompt::{build_prompt, PromptBundle, PROMPT_VERSION};
pub use scripted::{ScriptLine, ScriptSpec, ScriptedPolicy};

use crate::domain::Pk;

/// Instantiates the policy a spec describes for agent `me`.
pub fn instantiate(me: &Pk, spec: &PolicySpec, registry: &ModelRegistry) -> Result<Box<dyn Policy>, LlmError> {
    Ok(match spec {
        PolicySpec::Scripted(script) => Box::new(ScriptedPolicy::new(me.clone(), script.clone())),
        PolicySpec::Llm(llm) => Box::new(LlmPolicy::new(llm.clone(), registry)?),
    })
}

/// Per-agent random stream derived from the episode seed.
pub fn agent_rng(seed: u64, slot: usize, stream: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((slot as u64) << 8 | stream);
    rng
}
