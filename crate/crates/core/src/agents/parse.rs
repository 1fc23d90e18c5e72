//! The action grammar models are asked to reply in.
//!
//! Replies are keyed lines (`action_type:`, `argument:`, optional `to:`) with
//! a JSON object accepted as an alternative encoding. Keys are
//! case-insensitive and prose around the keyed block is ignored.

use std::sync::OnceLock;

use regex::Regex;
use serde_json::Value;
use thiserror::Error;

use crate::broker::{ActionKind, Addressee, AgentAction, Member};
use crate::domain::Pk;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("unparseable action ({reason})")]
pub struct ParseFailure {
    pub raw: String,
    pub reason: String,
}

impl ParseFailure {
    fn new(raw: &str, reason: impl Into<String>) -> Self {
        Self { raw: raw.to_owned(), reason: reason.into() }
    }
}

fn key_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r#"(?i)^\s*[*_`"']*\s*(action_type|argument|to)\s*[*_`"']*\s*:\s*(.*?)\s*$"#).unwrap()
    })
}

#[derive(Default)]
struct Fields {
    action_type: Option<String>,
    argument: Option<String>,
    to: Option<String>,
}

fn keyed_fields(reply: &str) -> Option<Fields> {
    let mut fields = Fields::default();
    let mut in_argument = false;
    for line in reply.lines() {
        if let Some(caps) = key_line().captures(line) {
            let value = caps[2].to_owned();
            in_argument = false;
            match caps[1].to_ascii_lowercase().as_str() {
                "action_type" => fields.action_type = Some(value),
                "argument" => {
                    fields.argument = Some(value);
                    in_argument = true;
                }
                _ => fields.to = Some(value),
            }
        } else if in_argument {
            if line.trim().is_empty() {
                in_argument = false;
            } else if let Some(arg) = fields.argument.as_mut() {
                arg.push('\n');
                arg.push_str(line.trim_end());
            }
        }
    }
    fields.action_type.is_some().then_some(fields)
}

fn json_fields(reply: &str) -> Option<Fields> {
    let start = reply.find('{')?;
    let end = reply.rfind('}')?;
    let Value::Object(map) = serde_json::from_str::<Value>(reply.get(start..=end)?).ok()? else {
        return None;
    };
    let pick = |key: &str| {
        map.iter().find(|(k, _)| k.eq_ignore_ascii_case(key)).and_then(|(_, v)| match v {
            Value::String(s) => Some(s.clone()),
            Value::Null => None,
            other => Some(other.to_string()),
        })
    };
    let fields = Fields { action_type: pick("action_type"), argument: pick("argument"), to: pick("to") };
    fields.action_type.is_some().then_some(fields)
}

fn resolve_name(raw: &str, name: &str, actor: &Pk, roster: &[Member]) -> Result<Addressee, ParseFailure> {
    let name = name.trim().trim_matches(|c| c == '"' || c == '\'');
    if name.is_empty() || ["all", "everyone", "none", "broadcast"].iter().any(|w| w.eq_ignore_ascii_case(name)) {
        return Ok(Addressee::Broadcast);
    }
    let matches: Vec<&Member> = roster.iter().filter(|m| m.name.eq_ignore_ascii_case(name)).collect();
    match matches.as_slice() {
        [] => Err(ParseFailure::new(raw, format!("no participant named `{name}`"))),
        [m] if &m.pk == actor => Err(ParseFailure::new(raw, "private message addressed to self")),
        [m] => Ok(Addressee::Direct(m.pk.clone())),
        _ => Err(ParseFailure::new(raw, format!("`{name}` names more than one participant"))),
    }
}

/// Parses a model reply into an action by `actor`. Addressee names resolve
/// against `roster` by exact, case-insensitive match.
pub fn parse_action(reply: &str, actor: &Pk, roster: &[Member]) -> Result<AgentAction, ParseFailure> {
    let fields = keyed_fields(reply)
        .or_else(|| json_fields(reply))
        .ok_or_else(|| ParseFailure::new(reply, "no action_type found"))?;
    let action_type = fields.action_type.unwrap_or_default();
    let kind: ActionKind = action_type.parse().map_err(|e: String| ParseFailure::new(reply, e))?;
    let addressee = match &fields.to {
        Some(name) => resolve_name(reply, name, actor, roster)?,
        None => Addressee::Broadcast,
    };
    let content = match kind {
        ActionKind::None => String::new(),
        _ => fields.argument.unwrap_or_default(),
    };
    Ok(AgentAction { actor: actor.clone(), kind, content, addressee })
}

/// Inverse of [`parse_action`].
pub fn render_action(action: &AgentAction, roster: &[Member]) -> String {
    let mut out = format!("action_type: {}\nargument: {}", action.kind.label(), action.content);
    if let Addressee::Direct(pk) = &action.addressee {
        let name = roster.iter().find(|m| &m.pk == pk).map(|m| m.name.as_str()).unwrap_or(pk.as_str());
        out.push_str(&format!("\nto: {name}"));
    }
    out
}
